#include "nlde/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "nlde/fitting.hpp"
#include "nlde/norms.hpp"

namespace nlde {

namespace {

/// Cached per-(grid, z) table of free resolvent symbols, applied in k-space.
struct FreeResolventTable {
    std::vector<Mat4> mult;
    void build(const DiracMatrices& dm, const Grid& g, cplx z) {
        mult.resize(g.npoints());
        for (long p = 0; p < g.npoints(); ++p)
            mult[p] = free_resolvent_symbol(dm, g.k_at(p), z);
    }
    SpinorField apply(const SpinorField& f) const {
        SpinorField fh = to_momentum(f);
        Eigen::Vector4cd v;
        for (long p = 0; p < fh.grid.npoints(); ++p) {
            cplx* d = fh.at(p);
            v << d[0], d[1], d[2], d[3];
            Eigen::Vector4cd w = mult[p] * v;
            for (int c = 0; c < 4; ++c) d[c] = w[c];
        }
        return to_position(fh);
    }
};

void apply_potential_into(const Potential& V, const SpinorField& f, SpinorField& out) {
    const long npts = f.grid.npoints();
    Eigen::Vector4cd v;
    for (long p = 0; p < npts; ++p) {
        const cplx* d = f.at(p);
        v << d[0], d[1], d[2], d[3];
        Eigen::Vector4cd w = V.values[p] * v;
        cplx* o = out.at(p);
        for (int c = 0; c < 4; ++c) o[c] = w[c];
    }
}

}  // namespace

SpinorField polynomial_weight(const SpinorField& f, double sigma) {
    SpinorField out = f;
    const long npts = f.grid.npoints();
    for (long p = 0; p < npts; ++p) {
        double w = std::pow(1.0 + f.grid.x_at(p).squaredNorm(), 0.5 * sigma);
        cplx* d = out.at(p);
        for (int c = 0; c < 4; ++c) d[c] *= w;
    }
    return out;
}

SpinorField perturbed_resolvent(const DiracMatrices& dm, const ResolventQuery& q,
                                const Potential& V, const SpinorField& f,
                                SolveReport* report) {
    FreeResolventTable r0;
    r0.build(dm, f.grid, q.z);
    if (V.is_zero()) {
        if (report) *report = {true, 0, 0.0};
        return r0.apply(f);
    }
    SpinorField rhs = r0.apply(f);

    if (q.solver == ResolventSolver::BornSeries) {
        // u = sum_j (-R_0 V)^j R_0 f; valid only while the terms contract
        SpinorField term = rhs;
        SpinorField acc = rhs;
        double prev = norm2(term);
        int j = 0;
        for (; j < q.max_iter; ++j) {
            SpinorField vt(f.grid);
            apply_potential_into(V, term, vt);
            term = r0.apply(vt);
            for (auto& zz : term.data) zz = -zz;
            double cur = norm2(term);
            if (cur >= prev && cur > q.tol * norm2(acc))
                throw std::runtime_error("Born series does not contract at this coupling");
            axpy(cplx(1, 0), term, acc);
            if (cur < q.tol * norm2(acc)) break;
            prev = cur;
        }
        if (report) *report = {true, j, 0.0};
        return acc;
    }

    // GMRES on M(z) u = (1 + R_0(z) V) u = R_0(z) f
    LinOp M = [&](const CVec& x, CVec& y) {
        SpinorField xf(f.grid);
        xf.data = x;
        SpinorField vx(f.grid);
        apply_potential_into(V, xf, vx);
        SpinorField rv = r0.apply(vx);
        y = x;
        for (size_t i = 0; i < y.size(); ++i) y[i] += rv.data[i];
    };
    CVec x(f.data.size(), cplx(0, 0));
    SolveReport rep = gmres(M, rhs.data, x, q.tol, q.max_iter);
    if (report) *report = rep;
    if (!rep.converged)
        throw std::runtime_error(
            "perturbed_resolvent: iterative solve stalled (z near spectrum?)");
    SpinorField out(f.grid);
    out.data = std::move(x);
    return out;
}

double grid_spectral_spacing(const DiracMatrices& dm, const Grid& g, double lambda) {
    std::vector<double> vals;
    vals.reserve(g.npoints());
    for (long p = 0; p < g.npoints(); ++p)
        vals.push_back(std::sqrt(g.k_at(p).squaredNorm() + dm.mass * dm.mass));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               vals.end());
    double la = std::abs(lambda);
    auto it = std::lower_bound(vals.begin(), vals.end(), la);
    std::vector<double> gaps;
    long i = std::distance(vals.begin(), it);
    for (long j = std::max<long>(1, i - 4);
         j < std::min<long>(static_cast<long>(vals.size()), i + 5); ++j)
        gaps.push_back(vals[j] - vals[j - 1]);
    if (gaps.empty()) return vals.size() > 1 ? vals[1] - vals[0] : 0.1;
    std::sort(gaps.begin(), gaps.end());
    return gaps[gaps.size() / 2];
}

namespace {

struct EpsSchedule {
    std::vector<double> eps;
    double eps_min;
};

EpsSchedule make_schedule(const DiracMatrices& dm, const Grid& g, double lambda,
                          const BoundaryValueOptions& opt) {
    EpsSchedule s;
    s.eps_min = opt.eps_min_factor * grid_spectral_spacing(dm, g, lambda);
    double e = std::max(opt.eps0, 2.0 * s.eps_min);
    while (e >= s.eps_min) {
        s.eps.push_back(e);
        e *= opt.ratio;
    }
    if (s.eps.size() < 2) s.eps = {2.0 * s.eps_min, s.eps_min};
    return s;
}

/// Epsilon-continuation driver shared by the ± and Im boundary values.
BoundaryValue extrapolate_schedule(
    const EpsSchedule& sched, double sigma_error,
    const std::function<SpinorField(double)>& solve) {
    BoundaryValue out;
    out.eps_min = sched.eps_min;
    SpinorField prev_val, prev_extrap;
    double prev_diff = -1.0;
    int grow_count = 0;
    for (size_t i = 0; i < sched.eps.size(); ++i) {
        double eps = sched.eps[i];
        SpinorField cur = solve(eps);
        out.eps_used.push_back(eps);
        if (i > 0) {
            double e_prev = sched.eps[i - 1];
            // linear Richardson: v* = v_i + (v_i - v_{i-1}) eps_i/(e_prev - eps_i)
            SpinorField extrap = cur;
            double c = eps / (e_prev - eps);
            for (size_t k = 0; k < extrap.data.size(); ++k)
                extrap.data[k] += c * (cur.data[k] - prev_val.data[k]);
            SpinorField dv = cur;
            for (size_t k = 0; k < dv.data.size(); ++k) dv.data[k] -= prev_val.data[k];
            double diff = weighted_sobolev_norm(dv, -sigma_error, 0);
            if (prev_diff >= 0 && diff > 1.5 * prev_diff) {
                if (++grow_count >= 2) {
                    out.diverged = true;
                    out.value = extrap;
                    out.error = diff;
                    return out;
                }
            } else {
                grow_count = 0;
            }
            if (i > 1) {
                SpinorField de = extrap;
                for (size_t k = 0; k < de.data.size(); ++k)
                    de.data[k] -= prev_extrap.data[k];
                out.error = weighted_sobolev_norm(de, -sigma_error, 0);
            } else {
                out.error = diff;
            }
            prev_extrap = extrap;
            prev_diff = diff;
            out.value = extrap;
        } else {
            prev_extrap = cur;
            out.value = cur;
        }
        prev_val = cur;
    }
    return out;
}

}  // namespace

BoundaryValue boundary_value(const DiracMatrices& dm, double lambda, int side,
                             const Potential& V, const SpinorField& f,
                             const BoundaryValueOptions& opt) {
    EpsSchedule sched = make_schedule(dm, f.grid, lambda, opt);
    int total_it = 0;
    auto solve = [&](double eps) {
        ResolventQuery q;
        q.z = cplx(lambda, side >= 0 ? eps : -eps);
        q.tol = opt.tol;
        q.max_iter = opt.max_iter;
        SolveReport rep;
        SpinorField v = perturbed_resolvent(dm, q, V, f, &rep);
        total_it += rep.iterations;
        return v;
    };
    BoundaryValue out = extrapolate_schedule(sched, opt.sigma_error, solve);
    out.total_iterations = total_it;
    return out;
}

BoundaryValue imag_boundary_value(const DiracMatrices& dm, double lambda,
                                  const Potential& V, const SpinorField& f,
                                  const BoundaryValueOptions& opt) {
    EpsSchedule sched = make_schedule(dm, f.grid, lambda, opt);
    int total_it = 0;
    auto solve = [&](double eps) {
        ResolventQuery qp;
        qp.z = cplx(lambda, eps);
        qp.tol = opt.tol;
        qp.max_iter = opt.max_iter;
        SolveReport rp, rm;
        SpinorField up = perturbed_resolvent(dm, qp, V, f, &rp);
        ResolventQuery qm = qp;
        qm.z = cplx(lambda, -eps);
        SpinorField um = perturbed_resolvent(dm, qm, V, f, &rm);
        total_it += rp.iterations + rm.iterations;
        SpinorField w(f.grid);
        const cplx half_over_i(0, -0.5);  // 1/(2i)
        for (size_t k = 0; k < w.data.size(); ++k)
            w.data[k] = half_over_i * (up.data[k] - um.data[k]);
        return w;
    };
    BoundaryValue out = extrapolate_schedule(sched, opt.sigma_error, solve);
    out.total_iterations = total_it;
    return out;
}

ThresholdReport threshold_scan(const DiracMatrices& dm, const Potential& V, double sigma,
                               const std::vector<double>& lambdas, unsigned seed,
                               int probes,
                               const std::function<SpinorField(const SpinorField&)>*
                                   continuous_projector,
                               const Grid* grid_for_free) {
    if (lambdas.size() < 2)
        throw std::invalid_argument("threshold_scan: degenerate lambda grid");
    for (size_t i = 1; i < lambdas.size(); ++i)
        if (!(lambdas[i] < lambdas[i - 1]) || !(lambdas[i] > dm.mass))
            throw std::invalid_argument(
                "threshold_scan: lambda samples must decrease strictly toward m");

    ThresholdReport rep;
    rep.lambda_samples = lambdas;

    Grid gg = V.is_zero() ? (grid_for_free ? *grid_for_free : Grid(16, 16.0)) : V.grid;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0, 1);
    std::vector<SpinorField> fs;
    for (int i = 0; i < probes; ++i) {
        SpinorField f(gg);
        for (auto& z : f.data) z = cplx(gauss(rng), gauss(rng));
        f = polynomial_weight(f, -sigma);
        if (continuous_projector) f = (*continuous_projector)(f);
        double n = norm2(f);
        for (auto& z : f.data) z /= n;
        fs.push_back(f);
    }

    std::vector<std::vector<SpinorField>> images(lambdas.size());
    for (size_t li = 0; li < lambdas.size(); ++li) {
        double lam = lambdas[li];
        BoundaryValueOptions opt;
        opt.sigma_error = sigma;
        double worst = 0.0, err = 0.0;
        std::vector<SpinorField> img;
        for (int i = 0; i < probes; ++i) {
            BoundaryValue bv = imag_boundary_value(dm, lam, V, fs[i], opt);
            double num = weighted_sobolev_norm(bv.value, -sigma, 0);
            double den = weighted_sobolev_norm(fs[i], sigma, 0);
            worst = std::max(worst, num / den);
            err = std::max(err, bv.error);
            img.push_back(bv.value);
        }
        images[li] = std::move(img);
        rep.im_norms.push_back(worst);
        rep.extrapolation_errors.push_back(err);
        rep.eps_used.push_back(4.0 * grid_spectral_spacing(dm, gg, lam));
    }

    std::vector<double> lx, ly;
    for (size_t i = 0; i < lambdas.size(); ++i) {
        lx.push_back(std::log(lambdas[i] - dm.mass));
        ly.push_back(std::log(rep.im_norms[i]));
    }
    LineFit f0 = fit_line(lx, ly);
    rep.fitted_exponent = f0.slope;
    rep.stderr_exponent = f0.stderr_slope;
    rep.r2 = f0.r2;
    rep.inconclusive = f0.r2 < 0.9;

    // finite-difference derivative exponents (l = 1, 2) from probe images
    for (int l = 1; l <= 2; ++l) {
        std::vector<double> dx, dy;
        for (size_t i = 0; i + l < lambdas.size(); ++i) {
            double worst = 0.0;
            for (int p = 0; p < probes; ++p) {
                SpinorField d = images[i][p];
                if (l == 1) {
                    double h = lambdas[i] - lambdas[i + 1];
                    for (size_t k = 0; k < d.data.size(); ++k)
                        d.data[k] = (images[i][p].data[k] - images[i + 1][p].data[k]) / h;
                } else {
                    double h1 = lambdas[i] - lambdas[i + 1];
                    double h2 = lambdas[i + 1] - lambdas[i + 2];
                    for (size_t k = 0; k < d.data.size(); ++k) {
                        cplx d1 = (images[i][p].data[k] - images[i + 1][p].data[k]) / h1;
                        cplx d2 = (images[i + 1][p].data[k] - images[i + 2][p].data[k]) / h2;
                        d.data[k] = 2.0 * (d1 - d2) / (h1 + h2);
                    }
                }
                worst = std::max(worst, weighted_sobolev_norm(d, -sigma, 0));
            }
            double lam_mid = 0.5 * (lambdas[i] + lambdas[i + l]);
            dx.push_back(std::log(lam_mid - dm.mass));
            dy.push_back(std::log(worst));
        }
        if (dx.size() >= 3) rep.derivative_exponents[l - 1] = fit_line(dx, dy).slope;
    }
    return rep;
}

SpinorField threshold_free_resolvent(const DiracMatrices& dm, const SpinorField& f,
                                     int sign) {
    double m = dm.mass;
    SpinorField fh = to_momentum(f);
    Eigen::Vector4cd v;
    for (long p = 0; p < fh.grid.npoints(); ++p) {
        Vec3 k = fh.grid.k_at(p);
        cplx* d = fh.at(p);
        v << d[0], d[1], d[2], d[3];
        Eigen::Vector4cd w;
        if (k.squaredNorm() == 0.0) {
            // regular band only; the singular k=0 channel carries zero
            // continuum measure and is projected out
            MomentumSymbol s = symbol_at(dm, k);
            if (sign > 0)
                w = (-1.0 / (2.0 * m)) * (s.p_minus * v);
            else
                w = (1.0 / (2.0 * m)) * (s.p_plus * v);
        } else {
            Mat4 r = free_resolvent_symbol(dm, k, cplx(sign * m, 0));
            w = r * v;
        }
        for (int c = 0; c < 4; ++c) d[c] = w[c];
    }
    return to_position(fh);
}

ResonanceReport resonance_detector(const DiracMatrices& dm, const Potential& V,
                                   double sigma, int sign, double pass_threshold,
                                   unsigned seed) {
    ResonanceReport rep;
    rep.threshold = pass_threshold;
    if (!V.is_zero() && std::isfinite(V.decay_exponent)) {
        if (!(sigma > 0.5 && sigma < V.decay_exponent - 0.5))
            throw std::invalid_argument(
                "resonance_detector: sigma outside (1/2, rho - 1/2)");
    }
    if (V.is_zero()) {
        rep.sigma_min = 1.0;
        rep.converged = true;
        rep.pass = true;
        return rep;
    }
    const Grid& g = V.grid;
    long dim = 4 * g.npoints();

    LinOp A = [&](const CVec& x, CVec& y) {
        SpinorField xf(g);
        xf.data = x;
        xf = polynomial_weight(xf, sigma);
        SpinorField vx(g);
        apply_potential_into(V, xf, vx);
        SpinorField r = threshold_free_resolvent(dm, vx, sign);
        r = polynomial_weight(r, -sigma);
        y = x;
        for (long i = 0; i < dim; ++i) y[i] += r.data[i];
    };
    LinOp Astar = [&](const CVec& x, CVec& y) {
        SpinorField xf(g);
        xf.data = x;
        xf = polynomial_weight(xf, -sigma);
        SpinorField r = threshold_free_resolvent(dm, xf, sign);
        SpinorField vr(g);
        apply_potential_into(V, r, vr);
        vr = polynomial_weight(vr, sigma);
        y = x;
        for (long i = 0; i < dim; ++i) y[i] += vr.data[i];
    };
    SigmaMinReport s = smallest_singular_value(A, Astar, dim, 1e-6, 60, seed);
    rep.sigma_min = s.sigma_min;
    rep.converged = s.converged;
    rep.pass = s.converged && s.sigma_min > pass_threshold;
    return rep;
}

}  // namespace nlde
