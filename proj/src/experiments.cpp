#include "nlde/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "nlde/norms.hpp"
#include "nlde/snapshot.hpp"
#include "nlde/threading.hpp"

namespace nlde {

namespace {

GateResult gate_le(const std::string& name, double value, double bound) {
    GateResult g;
    g.name = name;
    g.value = value;
    g.target = bound;
    g.pass = value <= bound;
    return g;
}

GateResult gate_band(const std::string& name, double value, double target, double tol) {
    GateResult g;
    g.name = name;
    g.value = value;
    g.target = target;
    g.tolerance = tol;
    g.pass = std::abs(value - target) <= tol;
    return g;
}

/// smooth localized random field: spectrally filtered white noise times a
/// spatial Gaussian envelope (decay laws need L^2_sigma-class data; raw
/// per-point noise is spectrally white and carries a non-decaying local
/// floor)
SpinorField random_localized(const Grid& g, unsigned seed, double width,
                             double corr_length = 1.2, double highpass = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0, 1);
    SpinorField f(g);
    for (long p = 0; p < g.npoints(); ++p)
        for (int c = 0; c < 4; ++c) f.at(p)[c] = cplx(gauss(rng), gauss(rng));
    SpinorField fh = to_momentum(f);
    apply_scalar_multiplier(fh, [corr_length, highpass](const Vec3& k) {
        double k2 = k.squaredNorm();
        double w = std::exp(-0.5 * corr_length * corr_length * k2);
        // optional suppression of the modes the box cannot disperse
        if (highpass > 0) w *= 1.0 - std::exp(-k2 / (highpass * highpass));
        return cplx(w, 0.0);
    });
    f = to_position(fh);
    for (long p = 0; p < g.npoints(); ++p) {
        double w = std::exp(-g.x_at(p).squaredNorm() / (2 * width * width));
        for (int c = 0; c < 4; ++c) f.at(p)[c] *= w;
    }
    double n = norm2(f);
    for (auto& z : f.data) z /= n;
    return f;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& stem) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "_%016llx.csv", static_cast<unsigned long long>(cfg.hash));
    return cfg.out_dir + "/" + stem + buf;
}

}  // namespace

RunContext::RunContext(const ExperimentConfig& c)
    : cfg(c), dm(dirac_matrices(kStandardRepresentation)), grid(c.n, c.L),
      V(build_potential(grid, c.potential)) {}

void RunContext::require_bound_states() {
    if (bound_ready) return;
    // disk cache keyed by the (grid, potential)-relevant part of the config
    char key[160];
    std::snprintf(key, sizeof key, "bound_%d_%.6f_%d_%.4f_%.4f_%.4f_%.4f",
                  cfg.n, cfg.L, static_cast<int>(cfg.potential.family),
                  cfg.potential.a_depth, cfg.potential.a_width, cfg.potential.b_depth,
                  cfg.potential.b_width);
    std::uint64_t h = fnv1a(key, std::strlen(key));
    char stem[96];
    std::snprintf(stem, sizeof stem, "/bound_cache_%016llx",
                  static_cast<unsigned long long>(h));
    std::string base = cfg.out_dir + stem;
    std::FILE* meta = std::fopen((base + ".meta").c_str(), "rb");
    if (meta) {
        double l0, l1;
        bool ok = std::fscanf(meta, "%lf %lf", &l0, &l1) == 2;
        std::fclose(meta);
        if (ok) {
            try {
                bound.phi0 = load_snapshot(base + "_phi0.fld", grid);
                bound.phi1 = load_snapshot(base + "_phi1.fld", grid);
                bound.lambda0 = l0;
                bound.lambda1 = l1;
                SpinorField r0 = apply_hamiltonian(dm, bound.phi0, &V);
                axpy(cplx(-l0, 0), bound.phi0, r0);
                bound.residual0 = norm2(r0);
                SpinorField r1 = apply_hamiltonian(dm, bound.phi1, &V);
                axpy(cplx(-l1, 0), bound.phi1, r1);
                bound.residual1 = norm2(r1);
                bound.gap_margin = std::min({std::abs(l0 - 1), std::abs(l0 + 1),
                                             std::abs(l1 - 1), std::abs(l1 + 1)});
                bound.nonresonant =
                    std::abs(l1 - l0) < std::min(std::abs(l0 + 1), std::abs(l0 - 1));
                if (bound.residual0 < 1e-8 && bound.residual1 < 1e-8) {
                    bound_ready = true;
                    return;
                }
            } catch (const std::exception&) {
                // cache miss or stale: recompute below
            }
        }
    }
    bound = bound_states(dm, V);
    bound_ready = true;
    save_snapshot(bound.phi0, base + "_phi0.fld");
    save_snapshot(bound.phi1, base + "_phi1.fld");
    std::FILE* m2 = std::fopen((base + ".meta").c_str(), "wb");
    if (m2) {
        std::fprintf(m2, "%.17g %.17g\n", bound.lambda0, bound.lambda1);
        std::fclose(m2);
    }
}

ResonanceReport RunContext::require_resonance_pass() {
    ResonanceReport rr = resonance_detector(dm, V, cfg.sigma);
    if (!rr.pass)
        throw std::runtime_error("config gate: resonance_detector FAIL (sigma_min = " +
                                 std::to_string(rr.sigma_min) + ")");
    return rr;
}

RunSummary run_validate(const ExperimentConfig& cfg) {
    RunSummary s;
    for (const char* cmd : {"propagation", "dispersion", "evolve", "stable-manifold"})
        validate_config(cfg, cmd);
    RunContext ctx(cfg);
    GateResult g;
    g.name = "potential rho > 5";
    g.value = ctx.V.is_zero() ? 1e9 : ctx.V.decay_exponent;
    g.pass = ctx.V.is_zero() || ctx.V.decay_exponent > 5.0;
    s.gates.push_back(g);
    return s;
}

RunSummary run_spectrum(const ExperimentConfig& cfg) {
    validate_config(cfg, "spectrum");
    RunContext ctx(cfg);
    ctx.require_bound_states();
    RunSummary s;
    CsvWriter csv(out_path(cfg, "spectrum"),
                  {"lambda0", "lambda1", "residual0", "residual1", "gap_margin",
                   "nonresonant"},
                  cfg.hash);
    csv.row({ctx.bound.lambda0, ctx.bound.lambda1, ctx.bound.residual0,
             ctx.bound.residual1, ctx.bound.gap_margin,
             ctx.bound.nonresonant ? 1.0 : 0.0});
    CsvWriter::document(cfg.out_dir, "spectrum", {"lambda0", "lambda1", "residual0",
                        "residual1", "gap_margin", "nonresonant"},
                        "gap eigenvalues of H with eigenpair residuals");
    s.outputs.push_back(csv.path());
    s.gates.push_back(gate_le("eigen residual", std::max(ctx.bound.residual0,
                                                         ctx.bound.residual1), 1e-9));
    GateResult nr;
    nr.name = "non-resonance";
    nr.value = std::abs(ctx.bound.lambda1 - ctx.bound.lambda0);
    nr.pass = ctx.bound.nonresonant;
    s.gates.push_back(nr);
    return s;
}

RunSummary run_resonance_scan(const ExperimentConfig& cfg) {
    RunContext ctx(cfg);
    RunSummary s;
    CsvWriter csv(out_path(cfg, "resonance_scan"),
                  {"coupling", "sigma_min", "converged"}, cfg.hash);
    for (double g = 0.2; g <= 1.41; g += 0.1) {
        Potential Vg = scaled_potential(ctx.V, g);
        ResonanceReport rr = resonance_detector(ctx.dm, Vg, cfg.sigma, +1, 0.01,
                                                cfg.seed);
        csv.row({g, rr.sigma_min, rr.converged ? 1.0 : 0.0});
    }
    ResonanceReport rr = resonance_detector(ctx.dm, ctx.V, cfg.sigma, +1, 0.01, cfg.seed);
    GateResult g;
    g.name = "resonance detector PASS at g=1";
    g.value = rr.sigma_min;
    g.target = 0.01;
    g.pass = rr.pass;
    s.gates.push_back(g);
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "resonance_scan", {"coupling", "sigma_min",
                        "converged"}, "sigma_min of 1 + R0(m)V under coupling sweep");
    return s;
}

RunSummary run_threshold_scan(const ExperimentConfig& cfg, bool free_control) {
    validate_config(cfg, "threshold-scan");
    RunContext ctx(cfg);
    RunSummary s;
    std::vector<double> lams;
    for (double d = 1.0; d > 0.095; d /= 1.334) lams.push_back(1.0 + d);

    std::function<SpinorField(const SpinorField&)> pc;
    const std::function<SpinorField(const SpinorField&)>* pcp = nullptr;
    Potential Vz = build_potential(ctx.grid, PotentialParams{PotentialFamily::Zero});
    const Potential* Vuse = &Vz;
    if (!free_control) {
        ctx.require_resonance_pass();
        ctx.require_bound_states();
        pc = [&ctx](const SpinorField& f) { return project_continuous_h(ctx.bound, f); };
        pcp = &pc;
        Vuse = &ctx.V;
    }
    ThresholdReport rep = threshold_scan(ctx.dm, *Vuse, cfg.sigma, lams, cfg.seed, 8, pcp, &ctx.grid);
    CsvWriter csv(out_path(cfg, free_control ? "threshold_scan_free" : "threshold_scan"),
                  {"lambda", "norm", "eps_used", "extrapolation_error"}, cfg.hash);
    for (size_t i = 0; i < lams.size(); ++i)
        csv.row({lams[i], rep.im_norms[i], rep.eps_used[i], rep.extrapolation_errors[i]});
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "threshold_scan", {"lambda", "norm", "eps_used",
                        "extrapolation_error"},
                        "Im R_V^+(lambda) weighted-norm surrogate near the threshold");
    GateResult g = gate_band(free_control ? "free threshold exponent"
                                          : "threshold exponent",
                             rep.fitted_exponent, 0.5, 0.15);
    g.inconclusive = rep.inconclusive;
    if (rep.inconclusive) g.pass = false;
    s.gates.push_back(g);
    return s;
}

RunSummary run_oscillatory(const ExperimentConfig& cfg) {
    RunSummary s;
    CsvWriter csv(out_path(cfg, "oscillatory"), {"class_id", "k", "value", "error"},
                  cfg.hash);
    // the fixed test family (pole = z)
    SphereIntegrand generic;
    generic.f = [](const Vec3&) { return cplx(1.0, 0.0); };
    generic.smoothness_class = SphereClass::C1Generic;
    SphereIntegrand vanishing;
    vanishing.f = [](const Vec3& w) {
        return cplx(std::sqrt(std::max(0.0, 1.0 - w.z() * w.z())), 0.0);
    };
    vanishing.smoothness_class = SphereClass::C2VanishingAtPoles;
    SphereIntegrand away;
    away.f = [](const Vec3& w) {
        double phi = std::acos(std::clamp(w.z(), -1.0, 1.0));
        double x = (phi - M_PI / 2) / 0.9;
        double a = std::max(0.0, 1.0 - std::abs(x));
        return cplx(a * a, 0.0);
    };
    away.smoothness_class = SphereClass::C2SupportedAway;

    std::vector<double> ks;
    for (double k = 2.0; k <= 110.0; k *= 1.12) ks.push_back(k);
    const SphereIntegrand* cases[3] = {&generic, &vanishing, &away};
    double worst_closed_form = 0.0;
    for (int ci = 0; ci < 3; ++ci) {
        cases[ci]->verify_class();
        std::vector<double> mags;
        for (double k : ks) {
            QuadratureResult r = sphere_integral_J(*cases[ci], k);
            mags.push_back(std::abs(r.value));
            csv.row({static_cast<double>(ci), k, std::abs(r.value), r.error});
            if (ci == 0) {
                cplx expect = 4.0 * M_PI * std::exp(cplx(0, k)) * std::sin(k) / k;
                worst_closed_form = std::max(
                    worst_closed_form, std::abs(r.value - expect) / std::abs(expect));
            }
        }
        BoundClassFit f = bound_class_fit(ks, mags,
                                          class_exponent(cases[ci]->smoothness_class));
        s.gates.push_back(gate_band("oscillatory class " + std::to_string(ci) + " slope",
                                    f.slope, f.class_exponent, 0.15));
    }
    s.gates.push_back(gate_le("closed form J_v relative error", worst_closed_form, 1e-8));

    // free kernel: decay fit for the mid band j=1 and the 2^{3j} static law
    CsvWriter kcsv(out_path(cfg, "kernel"), {"j", "t", "sup_abs_K", "error"}, cfg.hash);
    DecaySeries ks2;
    for (double t = 1.0; t <= 50.0; t *= 1.25) {
        double sup = free_kernel_sup(1, t, 1.0);
        ks2.t.push_back(t);
        ks2.value.push_back(sup);
        kcsv.row({1.0, t, sup, 0.0});
    }
    fit_decay(ks2, 1.0, 50.0);
    GateResult g = gate_band("kernel sup decay (j=1)", ks2.exponent, -1.5, 0.15);
    g.inconclusive = ks2.r2 < 0.9;
    s.gates.push_back(g);
    double k2 = free_kernel_K(2, 0, 0, 1.0).value.real();
    double k3 = free_kernel_K(3, 0, 0, 1.0).value.real();
    double k4 = free_kernel_K(4, 0, 0, 1.0).value.real();
    s.gates.push_back(gate_band("kernel t=0 block ratio j=3/2", k3 / k2, 8.0, 1.6));
    s.gates.push_back(gate_band("kernel t=0 block ratio j=4/3", k4 / k3, 8.0, 1.6));
    s.outputs.push_back(csv.path());
    s.outputs.push_back(kcsv.path());
    CsvWriter::document(cfg.out_dir, "oscillatory", {"class_id", "k", "value", "error"},
                        "sphere integrals J_v(k) for the three decay classes");
    CsvWriter::document(cfg.out_dir, "kernel", {"j", "t", "sup_abs_K", "error"},
                        "free dispersive kernel sup_x |K_j(x,t)|");
    return s;
}

RunSummary run_pls_sweep(const ExperimentConfig& cfg) {
    RunContext ctx(cfg);
    ctx.require_bound_states();
    RunSummary s;
    PlsManifold man(cfg.model, ctx.dm, ctx.V, ctx.bound, cfg.u_max, cfg.manifold_nodes);
    CsvWriter csv(out_path(cfg, "pls_sweep"),
                  {"abs_u", "E", "h_norm", "residual", "iterations"}, cfg.hash);
    std::vector<double> amps;
    for (double r = cfg.u_max / 30.0; r <= cfg.u_max; r *= 1.27) amps.push_back(r);
    double max_res = 0;
    SpinorField warm;
    for (double r : amps) {
        PLSPoint p = solve_pls(r, cfg.model, ctx.dm, ctx.V, ctx.bound, {},
                               warm.data.empty() ? nullptr : &warm);
        warm = p.h_part;
        csv.row({r, p.E, norm2(p.h_part), p.residual, static_cast<double>(p.iterations)});
        max_res = std::max(max_res, p.residual / std::max(norm2(p.S), 1.0));
    }
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "pls_sweep",
                        {"abs_u", "E", "h_norm", "residual", "iterations"},
                        "standing-wave manifold sweep");
    PLSPropertiesReport rep =
        pls_properties_check(man, ctx.dm, ctx.V, amps, {0.3, 1.1, M_PI / 2, 2.7});
    s.gates.push_back(gate_le("pls residual", max_res, 1e-10));
    s.gates.push_back(gate_band("E(u) slope", rep.E_slope, 2.0, 0.1));
    s.gates.push_back(gate_band("h(u) slope (paper bound: >= 2)", rep.h_slope, 3.0, 1.2));
    s.gates.push_back(gate_le("gauge residual", rep.max_gauge_residual, 1e-8));
    GateResult agm = gate_band("Agmon decay rate", rep.decay_rate_S, rep.agmon_rate,
                               0.2 * rep.agmon_rate);
    s.gates.push_back(agm);
    return s;
}

RunSummary run_linearize(const ExperimentConfig& cfg) {
    RunContext ctx(cfg);
    ctx.require_bound_states();
    RunSummary s;
    PlsManifold man(cfg.model, ctx.dm, ctx.V, ctx.bound, cfg.u_max, cfg.manifold_nodes);
    double gap = ctx.bound.lambda1 - ctx.bound.lambda0;

    CsvWriter csv(out_path(cfg, "linearize"),
                  {"r", "im_E1", "re_E1", "eig_residual", "kernel_gauge",
                   "kernel_scaling"},
                  cfg.hash);
    std::vector<double> rs = {0.0, cfg.u_max / 4, cfg.u_max / 2, cfg.u_max};
    double worst_re = 0, worst_eig = 0, worst_gauge = 0;
    std::vector<double> lr, ldrift;
    for (double r : rs) {
        LinearizedFrame fr = build_frame(r, man, ctx.dm, ctx.V);
        CField8 res = fr.apply_L(fr.S1_plus);
        axpy8(-fr.E1_plus, fr.S1_plus, res);
        double eig_res = norm8(res);
        KernelCheckReport kr = generalized_kernel_check(fr);
        csv.row({r, fr.E1_plus.imag(), fr.E1_plus.real(), eig_res,
                 kr.gauge_direction_residual, kr.scaling_direction_residual});
        worst_re = std::max(worst_re, std::abs(fr.E1_plus.real()));
        worst_eig = std::max(worst_eig, eig_res);
        worst_gauge = std::max(worst_gauge, kr.gauge_direction_residual);
        if (r > 0) {
            lr.push_back(std::log(r));
            ldrift.push_back(std::log(std::abs(fr.E1_plus.imag() - gap) + 1e-300));
        }
    }
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "linearize",
                        {"r", "im_E1", "re_E1", "eig_residual", "kernel_gauge",
                         "kernel_scaling"},
                        "excited eigenpair and generalized-kernel residuals vs |u|");
    s.gates.push_back(gate_le("Re E1", worst_re, 1e-8));
    s.gates.push_back(gate_le("eigen residual", worst_eig, 1e-8));
    s.gates.push_back(gate_le("kernel gauge residual", worst_gauge, 1e-6));
    LineFit drift = fit_line(lr, ldrift);
    s.gates.push_back(gate_band("E1 drift slope", drift.slope, 2.0, 0.15));
    return s;
}

namespace {

DecaySeries decay_series_of_flow(const DiracMatrices& dm, const Potential& V,
                                 const SpinorField& f0, double T, double dt, int nchk,
                                 double sigma, const std::string& label) {
    DecaySeries s;
    s.label = label;
    SpinorField psi = f0;
    double tcur = 0;
    for (int i = 1; i <= nchk; ++i) {
        double tnext = T * i / nchk;
        psi = linear_h_flow(dm, V, 0.0, psi, tnext - tcur, dt);
        tcur = tnext;
        s.t.push_back(tcur);
        s.value.push_back(weighted_sobolev_norm(polynomial_weight(psi, -sigma), 0, 0));
    }
    return s;
}

}  // namespace

RunSummary run_propagation(const ExperimentConfig& cfg) {
    validate_config(cfg, "propagation");
    RunContext ctx(cfg);
    ctx.require_resonance_pass();
    ctx.require_bound_states();
    RunSummary s;
    const Grid& g = ctx.grid;
    double trec = recurrence_horizon(g, ctx.dm.mass);
    double lo = cfg.fit_lo > 0 ? cfg.fit_lo : trec / 20;
    double hi = cfg.fit_hi > 0 ? cfg.fit_hi : trec / 2;
    double dt = cfg.dt > 0 ? cfg.dt : default_dt(g, ctx.dm.mass);

    SpinorField f = random_localized(g, cfg.seed, 2.5);
    SpinorField pf = project_continuous_h(ctx.bound, f);
    double bnd = hamiltonian_bound(ctx.dm, g, &ctx.V);

    DecaySeries generic = decay_series_of_flow(ctx.dm, ctx.V, pf, hi, dt, 40, cfg.sigma,
                                               "generic");
    fit_decay(generic, lo, hi);

    std::function<double(double)> chi_near = [](double l) {
        return 1.0 - dyadic_bump::transition((std::abs(l) - 1.05) / 0.4);
    };
    SpinorField fnear = project_continuous_h(
        ctx.bound, chebyshev_function_of_h(ctx.dm, pf, &ctx.V, chi_near, 300, bnd));
    DecaySeries near = decay_series_of_flow(ctx.dm, ctx.V, fnear, hi, dt, 40, cfg.sigma,
                                            "near-threshold");
    fit_decay(near, lo, hi);

    std::function<double(double)> chi_far = [&](double l) {
        double a = std::abs(l);
        return dyadic_bump::transition((a - 1.6) / 0.4) *
               (1.0 - dyadic_bump::transition((a - 0.85 * bnd) / 0.4));
    };
    SpinorField ffar = project_continuous_h(
        ctx.bound, chebyshev_function_of_h(ctx.dm, pf, &ctx.V, chi_far, 300, bnd));
    DecaySeries far = decay_series_of_flow(ctx.dm, ctx.V, ffar, hi, dt, 40, cfg.sigma,
                                           "far-from-threshold");
    fit_decay(far, lo, hi);

    CsvWriter csv(out_path(cfg, "propagation"), {"series", "t", "norm"}, cfg.hash);
    auto dump = [&](const DecaySeries& d, double id) {
        for (size_t i = 0; i < d.t.size(); ++i) csv.row({id, d.t[i], d.value[i]});
    };
    dump(generic, 0);
    dump(near, 1);
    dump(far, 2);
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "propagation", {"series", "t", "norm"},
                        "weighted-L2 decay series: 0 generic Pc data, 1 near-threshold "
                        "cutoff, 2 far-from-threshold cutoff");

    s.gates.push_back(gate_le("generic exponent <= -1.35", generic.exponent, -1.35));
    s.gates.push_back(gate_le("near-threshold exponent <= -1.35", near.exponent, -1.35));
    s.gates.push_back(gate_le("far-cutoff exponent <= -2.0", far.exponent, -2.0));
    for (auto* d : {&generic, &near, &far})
        if (d->inconclusive) s.gates.back().inconclusive = true;
    return s;
}

RunSummary run_dispersion(const ExperimentConfig& cfg) {
    validate_config(cfg, "dispersion");
    RunContext ctx(cfg);
    ctx.require_resonance_pass();
    ctx.require_bound_states();
    RunSummary s;
    const Grid& g = ctx.grid;
    double trec = recurrence_horizon(g, ctx.dm.mass);
    double lo = cfg.fit_lo > 0 ? cfg.fit_lo : trec / 20;
    double hi = cfg.fit_hi > 0 ? cfg.fit_hi : trec / 2;
    double dt = cfg.dt > 0 ? cfg.dt : default_dt(g, ctx.dm.mass);
    double theta = cfg.theta;
    double sp = cfg.s;                 // B^s_{1,q} data index
    double spr = sp - (2.0 + theta);   // target index s' = s - (2+theta) at p=1

    SpinorField f = random_localized(g, cfg.seed + 1, 2.0, 1.0, 0.3);
    SpinorField pf = project_continuous_h(ctx.bound, f);
    SpinorField f_small = random_localized(g, cfg.seed + 2, 2.0, 0.5);
    SpinorField pf_small = project_continuous_h(ctx.bound, f_small);

    DecaySeries large;
    large.label = "besov-large-t";
    SpinorField psi = pf;
    double tcur = 0;
    const int nchk = 40;
    for (int i = 1; i <= nchk; ++i) {
        double tnext = hi * i / nchk;
        psi = linear_h_flow(ctx.dm, ctx.V, 0.0, psi, tnext - tcur, dt);
        tcur = tnext;
        large.t.push_back(tcur);
        large.value.push_back(
            besov_norm(psi, spr, std::numeric_limits<double>::infinity(), cfg.q).value);
    }
    fit_decay(large, lo, hi);

    DecaySeries small;
    small.label = "besov-small-t";
    psi = pf_small;
    tcur = 0;
    for (int i = 1; i <= 20; ++i) {
        double tnext = 0.05 + (1.0 - 0.05) * i / 20.0;
        psi = linear_h_flow(ctx.dm, ctx.V, 0.0, psi, tnext - tcur, dt);
        tcur = tnext;
        small.t.push_back(tcur);
        small.value.push_back(
            besov_norm(psi, spr, std::numeric_limits<double>::infinity(), cfg.q).value);
    }
    {
        // the small-time branch spans [0.05, 1]: 1.3 decades
        LineFit f2;
        std::vector<double> lx, ly;
        for (size_t i = 0; i < small.t.size(); ++i) {
            lx.push_back(std::log(small.t[i]));
            ly.push_back(std::log(small.value[i]));
        }
        f2 = fit_line(lx, ly);
        small.exponent = f2.slope;
        small.r2 = f2.r2;
        small.window_lo = 0.05;
        small.window_hi = 1.0;
        small.inconclusive = f2.r2 < 0.9;
    }

    // per-block prefactor scaling via the free-kernel quadrature route,
    // measured at the matched-phase times t_j = t0 / 2^j where the kernel
    // family collapses onto its 2^{(2+theta)j} prefactor
    std::vector<double> js = {2, 3, 4}, lk;
    for (double j : js) {
        double tj = 8.0 / std::ldexp(1.0, static_cast<int>(j));
        lk.push_back(std::log2(free_kernel_sup(static_cast<int>(j), tj, ctx.dm.mass)));
    }
    std::vector<double> jx(js.begin(), js.end());
    LineFit block = fit_line(jx, lk);

    CsvWriter csv(out_path(cfg, "dispersion"), {"series", "t", "norm"}, cfg.hash);
    for (size_t i = 0; i < large.t.size(); ++i) csv.row({0, large.t[i], large.value[i]});
    for (size_t i = 0; i < small.t.size(); ++i) csv.row({1, small.t[i], small.value[i]});
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "dispersion", {"series", "t", "norm"},
                        "Besov-norm decay series: 0 large-time, 1 small-time");

    s.gates.push_back(gate_le("Besov large-t exponent <= -1.35 (theta=1)",
                              large.exponent, -1.35));
    GateResult sm = gate_band("Besov small-t exponent", small.exponent,
                              -1.0 + theta / 2 - 0.0, 0.35);
    sm.inconclusive = small.inconclusive;
    s.gates.push_back(sm);
    s.gates.push_back(gate_band("block prefactor slope (log2 sup K_j vs j)", block.slope,
                                2.0 + theta, 0.2 * (2.0 + theta)));
    return s;
}

RunSummary run_evolve(const ExperimentConfig& cfg) {
    validate_config(cfg, "evolve");
    RunContext ctx(cfg);
    ctx.require_bound_states();
    RunSummary s;
    PlsManifold man(cfg.model, ctx.dm, ctx.V, ctx.bound, cfg.u_max, cfg.manifold_nodes);
    FrameTable frames(man, ctx.dm, ctx.V, cfg.u_max, std::max(5, cfg.manifold_nodes / 2));

    double r0 = cfg.u_max * 2 / 3;
    LinearizedFrame fr0 = frames.frame_at(r0);
    SpinorField bump = random_localized(ctx.grid, cfg.seed + 3, 2.0);
    for (auto& z : bump.data) z *= 0.01;
    CField8 z8 = fr0.project_continuous(embed_complex(bump));
    ModulationState st0;
    st0.u = r0;
    st0.alpha_plus = cplx(0.004, 0.001);
    st0.alpha_minus = std::conj(st0.alpha_plus);
    st0.z = real_part(z8);

    CField8 full = embed_real(st0.z);
    axpy8(st0.alpha_plus, fr0.basis[2], full);
    axpy8(st0.alpha_minus, fr0.basis[3], full);
    SpinorField psi0 = man.at(st0.u).S;
    axpy(cplx(1, 0), extract_complex(full), psi0);

    double T = cfg.horizon > 0 ? cfg.horizon : 5.0;
    double dtB = cfg.dt > 0 ? cfg.dt : default_dt(ctx.grid, ctx.dm.mass);
    double dtA = dtB / 2;
    std::vector<double> samples;
    for (double t = 1.0; t <= T + 1e-9; t += 1.0) samples.push_back(t);

    std::vector<ModulationState> routeB =
        integrate_modulation(st0, frames, T, dtB, samples);
    std::vector<SpinorField> snapsA;
    std::vector<double> tA;
    EvolveOptions eo;
    eo.dt = dtA;
    eo.checkpoint_every = 1.0;
    eo.checkpoint = [&](double t, const SpinorField& f2) {
        snapsA.push_back(f2);
        tA.push_back(t);
    };
    evolve_nlde(psi0, T, ctx.dm, ctx.V, cfg.model, eo);

    CsvWriter csv(out_path(cfg, "evolve"),
                  {"t", "re_u", "im_u", "abs_alpha", "z_l2", "z_weighted", "z_hsprime",
                   "master_du", "master_dalpha", "master_dz"},
                  cfg.hash);
    double worst = 0;
    cplx ug = st0.u;
    for (size_t i = 0; i < snapsA.size() && i < routeB.size(); ++i) {
        const ModulationState& sb = routeB[i];
        ModulationState sa = decompose_full_state(snapsA[i], tA[i], sb.phase, frames, ug);
        ug = sa.u;
        RealSpinorField dz = sa.z;
        axpy(-1.0, sb.z, dz);
        double du = std::abs(sa.u - sb.u);
        double da = std::abs(sa.alpha_plus - sb.alpha_plus);
        double dzn = norm2(dz);
        worst = std::max({worst, du, da, dzn});
        SpinorField zc = complexify(sb.z);
        csv.row({sb.t, sb.u.real(), sb.u.imag(), std::abs(sb.alpha_plus), norm2(sb.z),
                 weighted_sobolev_norm(polynomial_weight(zc, -cfg.sigma), 0, cfg.s),
                 weighted_sobolev_norm(zc, 0, cfg.sprime), du, da, dzn});
    }
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "evolve",
                        {"t", "re_u", "im_u", "abs_alpha", "z_l2", "z_weighted",
                         "z_hsprime", "master_du", "master_dalpha", "master_dz"},
                        "modulation trajectory and master-consistency deltas");
    s.gates.push_back(gate_le("master consistency (component-wise)", worst, 1e-4));
    return s;
}

RunSummary run_stable_manifold(const ExperimentConfig& cfg) {
    validate_config(cfg, "stable-manifold");
    RunContext ctx(cfg);
    ctx.require_bound_states();
    RunSummary s;
    PlsManifold man(cfg.model, ctx.dm, ctx.V, ctx.bound, cfg.u_max, cfg.manifold_nodes);
    FrameTable frames(man, ctx.dm, ctx.V, cfg.u_max, std::max(5, cfg.manifold_nodes / 2));

    double trec = recurrence_horizon(ctx.grid, ctx.dm.mass);
    ShootOptions so;
    so.T = cfg.horizon > 0 ? cfg.horizon : trec / 2;
    so.dt = cfg.dt;
    so.sigma = cfg.sigma;
    so.s_weighted = cfg.s;
    so.beta = cfg.beta;
    so.sprime = cfg.sprime;
    so.fit_lo = cfg.fit_lo > 0 ? cfg.fit_lo : trec / 20;
    so.fit_hi = cfg.fit_hi > 0 ? cfg.fit_hi : trec / 2;

    SpinorField xi_base = project_continuous_h(ctx.bound,
                                               random_localized(ctx.grid, cfg.seed + 9, 2.2));
    double xin = norm2(xi_base);
    for (auto& z : xi_base.data) z /= xin;

    std::vector<double> v0s = {cfg.u_max / 3, cfg.u_max / 2, cfg.u_max * 2 / 3};
    std::vector<double> xis = {0.0, 0.01, 0.02, 0.04};

    CsvWriter csv(out_path(cfg, "stable_manifold"),
                  {"v0", "xi0_norm", "abs_psi", "v_inf_drift", "exp_u", "exp_alpha",
                   "exp_z", "converged"},
                  cfg.hash);
    double psi_at_zero = 0.0;
    std::vector<double> quad_x, quad_y, drift_x, drift_y;
    double worst_exp_u = -1e9, worst_exp_alpha = -1e9;
    for (double v0 : v0s)
        for (double xs : xis) {
            SpinorField xi0 = scaled(xi_base, xs);
            ShootResult res = shoot_stable_manifold(v0, xi0, frames, ctx.bound, so);
            double drift = std::abs(res.u_infinity - cplx(v0, 0));
            csv.row({v0, res.xi0_norm_effective, std::abs(res.psi_coefficient), drift,
                     res.monitors.u_drift.exponent, res.monitors.alpha_mod.exponent,
                     res.monitors.z_weighted.exponent, res.converged ? 1.0 : 0.0});
            if (xs == 0.0) {
                psi_at_zero = std::max(psi_at_zero, std::abs(res.psi_coefficient));
            } else {
                quad_x.push_back(v0 + res.xi0_norm_effective);
                quad_y.push_back(std::abs(res.psi_coefficient));
                drift_x.push_back(res.xi0_norm_effective);
                drift_y.push_back(drift);
                worst_exp_u = std::max(worst_exp_u, res.monitors.u_drift.exponent);
                worst_exp_alpha = std::max(worst_exp_alpha,
                                           res.monitors.alpha_mod.exponent);
            }
        }
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "stable_manifold",
                        {"v0", "xi0_norm", "abs_psi", "v_inf_drift", "exp_u",
                         "exp_alpha", "exp_z", "converged"},
                        "stable-manifold sweep: Psi coefficient and trajectory fits");

    s.gates.push_back(gate_le("Psi(v,0) = 0", psi_at_zero, 1e-12));
    // one fitted K across the sweep: |Psi| <= K (|v0| + ||xi0||)^2
    double K = 0;
    for (size_t i = 0; i < quad_x.size(); ++i)
        K = std::max(K, quad_y[i] / (quad_x[i] * quad_x[i]));
    GateResult kg;
    kg.name = "Psi quadratic bound fitted K";
    kg.value = K;
    kg.pass = std::isfinite(K) && K > 0;
    s.gates.push_back(kg);
    double Kp = 0;
    for (size_t i = 0; i < drift_x.size(); ++i)
        Kp = std::max(Kp, drift_y[i] / (drift_x[i] * drift_x[i]));
    GateResult kg2;
    kg2.name = "v_inf drift fitted K'";
    kg2.value = Kp;
    kg2.pass = std::isfinite(Kp);
    s.gates.push_back(kg2);
    s.gates.push_back(gate_le("exponent(|u - u_inf|) <= -1.7", worst_exp_u, -1.7));
    s.gates.push_back(gate_le("exponent(|alpha|) <= -1.35", worst_exp_alpha, -1.35));
    return s;
}

RunSummary run_extract(const ExperimentConfig& cfg) {
    validate_config(cfg, "extract");
    RunContext ctx(cfg);
    ctx.require_bound_states();
    RunSummary s;
    PlsManifold man(cfg.model, ctx.dm, ctx.V, ctx.bound, cfg.u_max, cfg.manifold_nodes);
    FrameTable frames(man, ctx.dm, ctx.V, cfg.u_max, std::max(5, cfg.manifold_nodes / 2));
    double trec = recurrence_horizon(ctx.grid, ctx.dm.mass);
    ShootOptions so;
    so.T = cfg.horizon > 0 ? cfg.horizon : trec / 2;
    so.dt = cfg.dt;
    so.sigma = cfg.sigma;
    so.s_weighted = cfg.s;
    so.beta = cfg.beta;
    so.sprime = cfg.sprime;
    so.fit_lo = cfg.fit_lo > 0 ? cfg.fit_lo : trec / 20;
    so.fit_hi = cfg.fit_hi > 0 ? cfg.fit_hi : trec / 2;

    SpinorField xi0 = project_continuous_h(ctx.bound,
                                           random_localized(ctx.grid, cfg.seed + 9, 2.2));
    double xin = norm2(xi0);
    for (auto& z : xi0.data) z *= 0.03 / xin;
    ShootResult shot = shoot_stable_manifold(cfg.u_max / 2, xi0, frames, ctx.bound, so);
    double dt = so.dt > 0 ? so.dt : default_dt(ctx.grid, ctx.dm.mass);
    AsymptoticProfile prof = asymptotic_extract(shot, frames, ctx.bound, dt, true);

    CsvWriter csv(out_path(cfg, "extract"),
                  {"t", "eps_weighted", "eps_besov", "eps_hsprime"}, cfg.hash);
    for (size_t i = 0; i < prof.eps_weighted.t.size(); ++i)
        csv.row({prof.eps_weighted.t[i], prof.eps_weighted.value[i],
                 prof.eps_besov.value[i], prof.eps_hsprime[i]});
    s.outputs.push_back(csv.path());
    CsvWriter::document(cfg.out_dir, "extract",
                        {"t", "eps_weighted", "eps_besov", "eps_hsprime"},
                        "asymptotic profile residual eps(t) in three norms");

    s.gates.push_back(gate_le("eps weighted exponent <= -1.7",
                              prof.eps_weighted.exponent, -1.7));
    s.gates.push_back(gate_le("xi_inf continuous-subspace defect",
                              prof.xi_inf_pc_defect, 1e-6));
    GateResult pc;
    pc.name = "pullback Cauchy increment";
    pc.value = prof.pullback_cauchy;
    pc.pass = std::isfinite(prof.pullback_cauchy);
    s.gates.push_back(pc);
    return s;
}

}  // namespace nlde
