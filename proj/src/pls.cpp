#include "nlde/pls.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "nlde/fitting.hpp"

namespace nlde {

namespace {

/// Gauge rotation e^{i theta} applied to a complex field.
SpinorField rotated(const SpinorField& f, double theta) {
    return scaled(f, std::exp(cplx(0, theta)));
}

/// Deflated solve of (H - E) y = b restricted to {phi0}^perp, right-
/// preconditioned by the free resolvent at E (E sits inside the gap).
SpinorField solve_gap_system(const DiracMatrices& dm, const Potential& V,
                             const BoundStateSet& bound, double E,
                             const SpinorField& b, double tol) {
    const Grid& g = b.grid;
    std::vector<Mat4> pre(g.npoints());
    for (long p = 0; p < g.npoints(); ++p)
        pre[p] = free_resolvent_symbol(dm, g.k_at(p), cplx(E, 0));

    auto project = [&](SpinorField& f) { axpy(-inner(bound.phi0, f), bound.phi0, f); };

    LinOp A = [&](const CVec& x, CVec& y) {
        SpinorField xf(g);
        xf.data = x;
        project(xf);
        SpinorField hx = apply_hamiltonian(dm, xf, V.is_zero() ? nullptr : &V);
        axpy(cplx(-E, 0), xf, hx);
        project(hx);
        y = std::move(hx.data);
    };
    LinOp P = [&](const CVec& x, CVec& y) {
        SpinorField xf(g);
        xf.data = x;
        SpinorField fh = to_momentum(xf);
        Eigen::Vector4cd v;
        for (long p = 0; p < g.npoints(); ++p) {
            cplx* d = fh.at(p);
            v << d[0], d[1], d[2], d[3];
            Eigen::Vector4cd w = pre[p] * v;
            for (int c = 0; c < 4; ++c) d[c] = w[c];
        }
        y = to_position(fh).data;
    };
    SpinorField rhs = b;
    project(rhs);
    CVec x(b.data.size(), cplx(0, 0));
    SolveReport rep = gmres(A, rhs.data, x, tol, 4000, 40, &P);
    if (!rep.converged) throw std::runtime_error("pls: inner gap solve stalled");
    SpinorField out(g);
    out.data = std::move(x);
    project(out);
    return out;
}

double plse_residual(const DiracMatrices& dm, const Potential& V,
                     const NonlinearityModel& model, const SpinorField& S, double E) {
    SpinorField r = apply_hamiltonian(dm, S, V.is_zero() ? nullptr : &V);
    axpy(cplx(1, 0), model.gradF_field(S), r);
    axpy(cplx(-E, 0), S, r);
    return norm2(r);
}

}  // namespace

PLSPoint solve_pls(cplx u, const NonlinearityModel& model, const DiracMatrices& dm,
                   const Potential& V, const BoundStateSet& bound,
                   const PLSOptions& opt, const SpinorField* warm_h) {
    double r = std::abs(u);
    double theta = (r == 0.0) ? 0.0 : std::arg(u);
    const Grid& g = bound.phi0.grid;

    PLSPoint pt;
    pt.u = u;
    if (r == 0.0) {
        pt.S = SpinorField(g);
        pt.h_part = SpinorField(g);
        pt.E = bound.lambda0;
        return pt;
    }

    SpinorField h = warm_h ? *warm_h : SpinorField(g);
    double E = bound.lambda0;
    double prev_res = 1e300;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        SpinorField S = scaled(bound.phi0, r);
        axpy(cplx(1, 0), h, S);
        SpinorField G = model.gradF_field(S);
        E = bound.lambda0 + inner(bound.phi0, G).real() / r;
        double res = plse_residual(dm, V, model, S, E);
        if (res <= opt.tol * std::max(norm2(S), 1.0)) {
            pt.S = rotated(S, theta);
            pt.h_part = rotated(h, theta);
            pt.E = E;
            pt.residual = res;
            pt.iterations = it;
            return pt;
        }
        SpinorField hn = solve_gap_system(dm, V, bound, E, G, opt.solver_tol);
        for (auto& z : hn.data) z = -z;
        if (res > prev_res) {
            // damped update when the undamped map overshoots
            for (size_t i = 0; i < h.data.size(); ++i)
                h.data[i] += opt.relax * (hn.data[i] - h.data[i]);
        } else {
            h = std::move(hn);
        }
        prev_res = res;
    }
    throw std::runtime_error(
        "solve_pls: fixed point did not converge; |u| outside the contraction "
        "region (last residual " + std::to_string(prev_res) + ")");
}

PlsManifold::PlsManifold(const NonlinearityModel& model, const DiracMatrices& dm,
                         const Potential& V, const BoundStateSet& bound, double r_max,
                         int nodes, const PLSOptions& opt)
    : r_max_(r_max), bound_(&bound), model_(model) {
    if (nodes < 5) throw std::invalid_argument("PlsManifold: need >= 5 nodes");
    double dr = r_max / (nodes - 1);
    SpinorField warm;
    for (int i = 0; i < nodes; ++i) {
        double r = i * dr;
        PLSPoint p = solve_pls(r, model, dm, V, bound, opt,
                               (i > 0 && !warm.data.empty()) ? &warm : nullptr);
        warm = p.h_part;
        r_.push_back(r);
        pts_.push_back(std::move(p));
    }
    // centered radial derivatives on the table (one-sided at the ends)
    long nf = 4 * bound.phi0.grid.npoints();
    for (int i = 0; i < nodes; ++i) {
        SpinorField d1(bound.phi0.grid), d2(bound.phi0.grid);
        int lo = std::max(0, i - 1), hi = std::min(nodes - 1, i + 1);
        double span = r_[hi] - r_[lo];
        for (long k = 0; k < nf; ++k)
            d1.data[k] = (pts_[hi].S.data[k] - pts_[lo].S.data[k]) / span;
        if (i > 0 && i < nodes - 1) {
            for (long k = 0; k < nf; ++k)
                d2.data[k] = (pts_[i + 1].S.data[k] - 2.0 * pts_[i].S.data[k] +
                              pts_[i - 1].S.data[k]) / (dr * dr);
        } else {
            int j = (i == 0) ? 1 : nodes - 2;
            for (long k = 0; k < nf; ++k)
                d2.data[k] = (pts_[j + 1].S.data[k] - 2.0 * pts_[j].S.data[k] +
                              pts_[j - 1].S.data[k]) / (dr * dr);
        }
        dS_.push_back(std::move(d1));
        d2S_.push_back(std::move(d2));
        double de = (pts_[hi].E - pts_[lo].E) / span;
        dE_.push_back(de);
    }
}

namespace {
/// cubic Lagrange weights over 4 consecutive nodes
void cubic_stencil(const std::vector<double>& r, double x, int& i0, double w[4]) {
    int n = static_cast<int>(r.size());
    double dr = r[1] - r[0];
    int ic = std::clamp(static_cast<int>(std::floor(x / dr)), 0, n - 2);
    i0 = std::clamp(ic - 1, 0, n - 4);
    for (int a = 0; a < 4; ++a) {
        w[a] = 1.0;
        for (int b = 0; b < 4; ++b)
            if (a != b) w[a] *= (x - r[i0 + b]) / (r[i0 + a] - r[i0 + b]);
    }
}
}  // namespace

SpinorField PlsManifold::interp(const std::function<const SpinorField&(int)>& tab,
                                double x) const {
    int i0;
    double w[4];
    cubic_stencil(r_, x, i0, w);
    SpinorField out(tab(0).grid);
    for (int a = 0; a < 4; ++a) axpy(cplx(w[a], 0), tab(i0 + a), out);
    return out;
}

double PlsManifold::interp1(const std::vector<double>& tab, double x) const {
    int i0;
    double w[4];
    cubic_stencil(r_, x, i0, w);
    double s = 0;
    for (int a = 0; a < 4; ++a) s += w[a] * tab[i0 + a];
    return s;
}

SpinorField PlsManifold::S(double r) const {
    return interp([this](int i) -> const SpinorField& { return pts_[i].S; }, r);
}
SpinorField PlsManifold::dS_dr(double r) const {
    return interp([this](int i) -> const SpinorField& { return dS_[i]; }, r);
}
SpinorField PlsManifold::d2S_dr2(double r) const {
    return interp([this](int i) -> const SpinorField& { return d2S_[i]; }, r);
}
double PlsManifold::E(double r) const {
    std::vector<double> evals(pts_.size());
    for (size_t i = 0; i < pts_.size(); ++i) evals[i] = pts_[i].E;
    return interp1(evals, r);
}
double PlsManifold::dE_dr(double r) const { return interp1(dE_, r); }

PLSPoint PlsManifold::at(cplx u) const {
    double r = std::abs(u), theta = (r == 0) ? 0.0 : std::arg(u);
    PLSPoint p;
    p.u = u;
    p.S = scaled(S(r), std::exp(cplx(0, theta)));
    p.E = E(r);
    SpinorField h = p.S;
    axpy(-u, bound_->phi0, h);
    p.h_part = std::move(h);
    return p;
}

PLSPropertiesReport pls_properties_check(const PlsManifold& man,
                                         const DiracMatrices& dm, const Potential& V,
                                         const std::vector<double>& amplitudes,
                                         const std::vector<double>& phases) {
    if (amplitudes.size() < 5 || phases.size() < 4)
        throw std::invalid_argument("pls_properties_check: need >= 5 amplitudes, >= 4 phases");
    PLSPropertiesReport rep;
    const BoundStateSet& b = man.bound();
    const NonlinearityModel& model = man.model();

    std::vector<double> lu, lh, lE;
    for (double r : amplitudes) {
        PLSPoint p = man.at(r);
        // gauge orbit: rotated fields must still solve the PLSE with E(|u|)
        for (double th : phases) {
            PLSPoint q = man.at(r * std::exp(cplx(0, th)));
            double res = plse_residual(dm, V, model, q.S, q.E);
            rep.max_gauge_residual = std::max(rep.max_gauge_residual, res);
            rep.max_E_phase_dependence =
                std::max(rep.max_E_phase_dependence, std::abs(q.E - p.E));
        }
        lu.push_back(std::log(r));
        lh.push_back(std::log(std::max(norm2(p.h_part), 1e-300)));
        lE.push_back(std::log(std::max(std::abs(p.E - b.lambda0), 1e-300)));
    }
    rep.h_slope = fit_line(lu, lh).slope;
    rep.E_slope = fit_line(lu, lE).slope;

    // spatial decay of S and of dS/dr: radial log-linear fit
    double r_probe = amplitudes.back();
    PLSPoint p = man.at(r_probe);
    rep.agmon_rate = std::sqrt(std::max(0.0, dm.mass * dm.mass - p.E * p.E));
    auto decay_fit = [&](const SpinorField& f) {
        const Grid& g = f.grid;
        std::map<int, double> shell;
        for (long q = 0; q < g.npoints(); ++q) {
            double rr = g.x_at(q).norm();
            int bin = static_cast<int>(std::floor(rr / g.dx));
            const cplx* d = f.at(q);
            double a = 0;
            for (int c = 0; c < 4; ++c) a += std::norm(d[c]);
            a = std::sqrt(a);
            auto it = shell.find(bin);
            if (it == shell.end() || it->second < a) shell[bin] = a;
        }
        std::vector<double> xs, ys;
        for (auto& [bin, a] : shell) {
            double rr = (bin + 0.5) * g.dx;
            if (rr < 2.0 || rr > 0.35 * g.L || a <= 0) continue;
            xs.push_back(rr);
            ys.push_back(std::log(a));
        }
        return -fit_line(xs, ys).slope;
    };
    rep.decay_rate_S = decay_fit(p.S);
    rep.decay_rate_dS = decay_fit(man.dS_dr(r_probe));

    rep.pass = true;
    if (rep.max_gauge_residual > 1e-9 * 10) { rep.pass = false; rep.failure = "gauge residual"; }
    else if (rep.max_E_phase_dependence > 1e-9) { rep.pass = false; rep.failure = "E phase dependence"; }
    else if (rep.h_slope < 1.9) { rep.pass = false; rep.failure = "h(u) slope below the quadratic bound"; }
    else if (rep.decay_rate_S <= 0) { rep.pass = false; rep.failure = "S decay rate"; }
    else if (rep.decay_rate_dS <= 0) { rep.pass = false; rep.failure = "dS decay rate"; }
    return rep;
}

}  // namespace nlde
