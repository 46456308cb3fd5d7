#include "nlde/norms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nlde {

namespace dyadic_bump {

double transition(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    double a = std::exp(-1.0 / s);
    double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

double chi(double r) { return 1.0 - transition(r - 1.0); }

double phihat(double r) { return chi(r) - chi(2.0 * r); }

double phihat_j(int j, double r) {
    return j == 0 ? chi(r) : phihat(std::ldexp(r, -j));
}

}  // namespace dyadic_bump

SpinorField bessel_potential(const SpinorField& f, double t) {
    SpinorField fh = to_momentum(f);
    apply_scalar_multiplier(fh, [t](const Vec3& k) {
        return cplx(std::pow(1.0 + k.squaredNorm(), 0.5 * t), 0.0);
    });
    return to_position(fh);
}

double weighted_sobolev_norm(const SpinorField& f, double sigma, double t) {
    if (f.tag != SpaceTag::Position)
        throw std::logic_error("weighted_sobolev_norm: position-space field required");
    SpinorField g = (t != 0.0) ? bessel_potential(f, t) : f;
    const long npts = g.grid.npoints();
    double s = 0.0;
    for (long p = 0; p < npts; ++p) {
        double w = std::pow(1.0 + g.grid.x_at(p).squaredNorm(), sigma);
        const cplx* d = g.at(p);
        for (int c = 0; c < 4; ++c) s += w * std::norm(d[c]);
    }
    return std::sqrt(s * g.grid.cell_volume());
}

int besov_jmax(const Grid& g) {
    // block j lives on |k| in [2^{j-1}, 2^{j+1}]; usable while the lower
    // edge stays inside the corner radius
    int j = 0;
    while (std::ldexp(1.0, j) <= g.k_corner()) ++j;
    return j;  // first j with 2^j > corner still overlaps; blocks beyond truncate
}

SpinorField besov_block(const SpinorField& f, int j) {
    SpinorField fh = (f.tag == SpaceTag::Momentum) ? f : to_momentum(f);
    apply_scalar_multiplier(fh, [j](const Vec3& k) {
        return cplx(dyadic_bump::phihat_j(j, k.norm()), 0.0);
    });
    return to_position(fh);
}

double lp_norm(const SpinorField& f, double p) {
    const long npts = f.grid.npoints();
    if (std::isinf(p)) {
        double m = 0.0;
        for (long q = 0; q < npts; ++q) {
            const cplx* d = f.at(q);
            double a = 0.0;
            for (int c = 0; c < 4; ++c) a += std::norm(d[c]);
            m = std::max(m, a);
        }
        return std::sqrt(m);
    }
    double s = 0.0;
    for (long q = 0; q < npts; ++q) {
        const cplx* d = f.at(q);
        double a = 0.0;
        for (int c = 0; c < 4; ++c) a += std::norm(d[c]);
        s += std::pow(a, 0.5 * p);
    }
    return std::pow(s * f.volume_weight(), 1.0 / p);
}

BesovResult besov_norm(const SpinorField& f, double s, double p, double q) {
    if (f.tag != SpaceTag::Position)
        throw std::logic_error("besov_norm: position-space field required");
    BesovResult res;
    SpinorField fh = to_momentum(f);
    int jmax = besov_jmax(f.grid);
    res.jmax_used = jmax;
    // blocks with support fully beyond the corner contribute nothing the
    // grid can see; record truncation if the field has energy at the corner
    double corner_mass = 0.0, total_mass = 0.0;
    const long npts = f.grid.npoints();
    for (long idx = 0; idx < npts; ++idx) {
        const cplx* d = fh.at(idx);
        double a = 0.0;
        for (int c = 0; c < 4; ++c) a += std::norm(d[c]);
        total_mass += a;
        if (fh.grid.k_at(idx).norm() > 0.75 * fh.grid.k_corner()) corner_mass += a;
    }
    res.truncated = total_mass > 0 && corner_mass / total_mass > 1e-10;

    bool qinf = std::isinf(q);
    double acc = 0.0, accmax = 0.0;
    for (int j = 0; j <= jmax; ++j) {
        SpinorField blk = fh;
        apply_scalar_multiplier(blk, [j](const Vec3& k) {
            return cplx(dyadic_bump::phihat_j(j, k.norm()), 0.0);
        });
        double np = lp_norm(to_position(blk), p);
        double w = std::pow(2.0, j * s) * np;
        if (qinf)
            accmax = std::max(accmax, w);
        else
            acc += std::pow(w, q);
    }
    res.value = qinf ? accmax : std::pow(acc, 1.0 / q);
    return res;
}

}  // namespace nlde
