#include "nlde/potential.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "nlde/fitting.hpp"

namespace nlde {

double Potential::sup_norm() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, v.operatorNorm());
    return m;
}

namespace {

Mat4 sigma3_block() {
    Mat4 s = Mat4::Zero();
    s(0, 0) = 1; s(1, 1) = -1; s(2, 2) = 1; s(3, 3) = -1;  // diag(sigma3, sigma3)
    return s;
}

}  // namespace

Potential build_potential(const Grid& g, const PotentialParams& params) {
    Potential v;
    v.grid = g;
    v.params = params;
    if (params.family == PotentialFamily::Zero) {
        v.decay_exponent = std::numeric_limits<double>::infinity();
        return v;
    }
    if (params.family == PotentialFamily::UserTable)
        throw std::invalid_argument("build_potential: use build_potential_from_table");

    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Mat4 s3 = sigma3_block();
    const long npts = g.npoints();
    v.values.resize(npts);
    bool kramers = params.family == PotentialFamily::KramersBreaking;
    for (long p = 0; p < npts; ++p) {
        double r2 = g.x_at(p).squaredNorm();
        double a = params.a_depth * std::exp(-r2 / (params.a_width * params.a_width));
        Mat4 m = a * dm.beta;
        if (kramers) {
            // electric twin of the scalar well: a pure a(x) beta well binds
            // alpha5-mirrored states at BOTH thresholds, which can never meet
            // the two-eigenvalue requirement; a(x)(beta + 1) detaches states
            // from +m only, and b(x) Sigma3 splits the Kramers doublet
            m += a * Mat4::Identity();
            double b = params.b_depth * std::exp(-r2 / (params.b_width * params.b_width));
            m += b * s3;
        }
        v.values[p] = m;
    }
    v.breaks_time_reversal = kramers && params.b_depth != 0.0;
    v.decay_exponent = fit_tail_exponent(v);
    return v;
}

Potential build_potential_from_table(const Grid& g, std::vector<Mat4> table) {
    if (static_cast<long>(table.size()) != g.npoints())
        throw std::invalid_argument("potential table size mismatch");
    for (const auto& m : table)
        if ((m - m.adjoint()).norm() > 1e-12 * (1.0 + m.norm()))
            throw std::invalid_argument("potential table must be hermitian");
    Potential v;
    v.grid = g;
    v.params.family = PotentialFamily::UserTable;
    v.values = std::move(table);
    v.decay_exponent = fit_tail_exponent(v);
    // crude flag: the table breaks time reversal when it is not beta-colinear
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    v.breaks_time_reversal = false;
    for (const auto& m : v.values) {
        cplx a = (dm.beta * m).trace() / 4.0;
        if ((m - a.real() * dm.beta).norm() > 1e-10 * (1.0 + m.norm())) {
            v.breaks_time_reversal = true;
            break;
        }
    }
    return v;
}

double fit_tail_exponent(const Potential& v) {
    if (v.is_zero()) return std::numeric_limits<double>::infinity();
    // radial shell maxima of ||V|| over the outer half of the box
    std::map<int, double> shell;  // bin by r in units of dx
    const long npts = v.grid.npoints();
    for (long p = 0; p < npts; ++p) {
        double r = v.grid.x_at(p).norm();
        int bin = static_cast<int>(std::floor(r / v.grid.dx));
        double a = v.values[p].operatorNorm();
        auto it = shell.find(bin);
        if (it == shell.end() || it->second < a) shell[bin] = a;
    }
    double rmax = v.grid.L / 2.0;
    double sup = v.sup_norm();
    std::vector<double> lx, ly;
    for (auto& [bin, a] : shell) {
        double r = (bin + 0.5) * v.grid.dx;
        if (r < 0.3 * rmax || r > 0.95 * rmax) continue;
        if (a < 1e-14 * sup) continue;  // underflow: tail already dead
        lx.push_back(std::log(std::sqrt(1.0 + r * r)));
        ly.push_back(std::log(a));
    }
    if (lx.size() < 3) return std::numeric_limits<double>::infinity();
    LineFit f = fit_line(lx, ly);
    return -f.slope;
}

Potential scaled_potential(const Potential& v, double g) {
    Potential w = v;
    for (auto& m : w.values) m *= g;
    if (!w.is_zero()) w.decay_exponent = fit_tail_exponent(w);
    return w;
}

}  // namespace nlde
