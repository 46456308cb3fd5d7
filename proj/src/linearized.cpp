#include "nlde/linearized.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

#include "nlde/fitting.hpp"
#include "nlde/norms.hpp"
#include "nlde/resolvent.hpp"

namespace nlde {

CField8 embed_real(const RealSpinorField& f) {
    CField8 out(f.grid);
    for (long p = 0; p < f.grid.npoints(); ++p) {
        const double* d = f.at(p);
        cplx* a = out.a.at(p);
        cplx* b = out.b.at(p);
        for (int c = 0; c < 4; ++c) {
            a[c] = d[c];
            b[c] = d[4 + c];
        }
    }
    return out;
}

RealSpinorField real_part(const CField8& f) {
    RealSpinorField out(f.a.grid);
    for (long p = 0; p < f.a.grid.npoints(); ++p) {
        const cplx* a = f.a.at(p);
        const cplx* b = f.b.at(p);
        double* d = out.at(p);
        for (int c = 0; c < 4; ++c) {
            d[c] = a[c].real();
            d[4 + c] = b[c].real();
        }
    }
    return out;
}

CField8 embed_complex(const SpinorField& f) {
    CField8 out(f.grid);
    for (long p = 0; p < f.grid.npoints(); ++p) {
        const cplx* d = f.at(p);
        cplx* a = out.a.at(p);
        cplx* b = out.b.at(p);
        for (int c = 0; c < 4; ++c) {
            a[c] = d[c].real();
            b[c] = d[c].imag();
        }
    }
    return out;
}

SpinorField extract_complex(const CField8& f) {
    SpinorField out(f.a.grid);
    for (long p = 0; p < f.a.grid.npoints(); ++p) {
        const cplx* a = f.a.at(p);
        const cplx* b = f.b.at(p);
        cplx* d = out.at(p);
        for (int c = 0; c < 4; ++c) d[c] = cplx(a[c].real(), b[c].real());
    }
    return out;
}

cplx inner8(const CField8& x, const CField8& y) { return inner(x.a, y.a) + inner(x.b, y.b); }

double norm8(const CField8& x) {
    return std::sqrt(norm2(x.a) * norm2(x.a) + norm2(x.b) * norm2(x.b));
}

void axpy8(cplx alpha, const CField8& x, CField8& y) {
    axpy(alpha, x.a, y.a);
    axpy(alpha, x.b, y.b);
}

void scale8(CField8& x, cplx alpha) {
    for (auto& z : x.a.data) z *= alpha;
    for (auto& z : x.b.data) z *= alpha;
}

CField8 conj8(const CField8& x) {
    CField8 out = x;
    for (auto& z : out.a.data) z = std::conj(z);
    for (auto& z : out.b.data) z = std::conj(z);
    return out;
}

CField8 apply_J(const CField8& f) {
    CField8 out(f.a.grid);
    out.a = scaled(f.b, cplx(-1, 0));
    out.b = f.a;
    return out;
}

CField8 apply_Jdyn(const CField8& f) {
    CField8 out(f.a.grid);
    out.a = f.b;
    out.b = scaled(f.a, cplx(-1, 0));
    return out;
}

namespace {

/// split g = (v; -iv) + (w; +iw):  v = (a + i b)/2, w = (a - i b)/2
void holo_split(const CField8& g, SpinorField& v, SpinorField& w) {
    const cplx I(0, 1);
    v = g.a;
    w = g.a;
    for (size_t i = 0; i < v.data.size(); ++i) {
        v.data[i] = 0.5 * (g.a.data[i] + I * g.b.data[i]);
        w.data[i] = 0.5 * (g.a.data[i] - I * g.b.data[i]);
    }
}

CField8 holo_merge(const SpinorField& v, const SpinorField& w) {
    CField8 g(v.grid);
    const cplx I(0, 1);
    for (size_t i = 0; i < v.data.size(); ++i) {
        g.a.data[i] = v.data[i] + w.data[i];
        g.b.data[i] = -I * v.data[i] + I * w.data[i];
    }
    return g;
}

/// conjugate-linear twin: Tbar f = conj(T conj(f))
SpinorField apply_conj_op(const std::function<SpinorField(const SpinorField&)>& T,
                          const SpinorField& f) {
    SpinorField cf = f;
    for (auto& z : cf.data) z = std::conj(z);
    SpinorField out = T(cf);
    for (auto& z : out.data) z = std::conj(z);
    return out;
}

/// realify(T) on a complexified field via the holomorphic split.
CField8 apply_realified(const std::function<SpinorField(const SpinorField&)>& T,
                        const CField8& g) {
    SpinorField v, w;
    holo_split(g, v, w);
    SpinorField tv = T(v);
    SpinorField tw = apply_conj_op(T, w);
    return holo_merge(tv, tw);
}

Mat8 realify_matrix(const Mat4& M) {
    Mat8 out;
    Eigen::Matrix4d re = M.real(), im = M.imag();
    out.block<4, 4>(0, 0) = re;
    out.block<4, 4>(0, 4) = -im;
    out.block<4, 4>(4, 0) = im;
    out.block<4, 4>(4, 4) = re;
    return out;
}

void apply_pointwise8(const std::vector<Mat8>& table, CField8& g) {
    using Vec8c = Eigen::Matrix<cplx, 8, 1>;
    Vec8c v;
    for (long p = 0; p < g.a.grid.npoints(); ++p) {
        cplx* a = g.a.at(p);
        cplx* b = g.b.at(p);
        for (int c = 0; c < 4; ++c) {
            v[c] = a[c];
            v[4 + c] = b[c];
        }
        Vec8c w = table[p] * v;
        for (int c = 0; c < 4; ++c) {
            a[c] = w[c];
            b[c] = w[4 + c];
        }
    }
}

}  // namespace

CField8 LinearizedFrame::apply_Hu(const CField8& g) const {
    // realify(D_m - E) spectrally + pointwise (realify(V) + d2F(S))
    auto T = [this](const SpinorField& f) {
        SpinorField out = apply_dirac(*dm, f);
        axpy(cplx(-E, 0), f, out);
        return out;
    };
    CField8 out = apply_realified(T, g);
    CField8 pw = g;
    apply_pointwise8(pointwise, pw);
    axpy8(cplx(1, 0), pw, out);
    return out;
}

CField8 LinearizedFrame::apply_L(const CField8& g) const { return apply_Jdyn(apply_Hu(g)); }

CField8 LinearizedFrame::apply_L_adjoint(const CField8& g) const {
    // (J_dyn H)^* = H J_dyn^* = -H J_dyn
    CField8 out = apply_Hu(apply_Jdyn(g));
    scale8(out, cplx(-1, 0));
    return out;
}

Eigen::Vector4cd LinearizedFrame::dual_coefficients(const CField8& g) const {
    Eigen::Vector4cd zg;
    for (int i = 0; i < 4; ++i) zg[i] = inner8(zeta[i], g);
    return gram_inv * zg;
}

CField8 LinearizedFrame::project_continuous(const CField8& g) const {
    Eigen::Vector4cd c = dual_coefficients(g);
    CField8 out = g;
    for (int i = 0; i < 4; ++i) axpy8(-c[i], basis[i], out);
    return out;
}

CField8 LinearizedFrame::project_continuous_adjoint(const CField8& g) const {
    Eigen::Vector4cd bg;
    for (int i = 0; i < 4; ++i) bg[i] = inner8(basis[i], g);
    Eigen::Vector4cd c = gram_inv.adjoint() * bg;
    CField8 out = g;
    for (int i = 0; i < 4; ++i) axpy8(-c[i], zeta[i], out);
    return out;
}

LinearizedFrame build_frame(double r, const PlsManifold& man, const DiracMatrices& dm,
                            const Potential& V, const FrameOptions& opt) {
    const BoundStateSet& bound = man.bound();
    const Grid& g = bound.phi0.grid;
    LinearizedFrame fr;
    fr.r = r;
    fr.dm = &dm;
    fr.V = &V;
    fr.E = man.E(r);
    fr.dE_dr = man.dE_dr(r);
    fr.lambda_gap = bound.lambda1 - bound.lambda0;
    fr.S = man.S(r);
    fr.dS_r = man.dS_dr(r);
    fr.d2S_r = man.d2S_dr2(r);

    // pointwise 8x8 block: realify(V) + d2F(S)
    const NonlinearityModel& model = man.model();
    fr.pointwise.resize(g.npoints());
    Vec4c z;
    for (long p = 0; p < g.npoints(); ++p) {
        Mat8 m = Mat8::Zero();
        if (!V.is_zero()) m = realify_matrix(V.values[p]);
        const cplx* d = fr.S.at(p);
        z << d[0], d[1], d[2], d[3];
        m += model.d2F_matrix(z);
        fr.pointwise[p] = m;
    }

    // excited eigenpair by shifted inverse iteration around +i(lambda1-lambda0)
    {
        cplx mu(0.0, fr.lambda_gap);
        // seed: the exact u=0 eigenvector for E1+ = +i gap: (conj phi1; i conj phi1)
        CField8 x(g);
        const cplx I(0, 1);
        for (size_t i = 0; i < x.a.data.size(); ++i) {
            cplx c = std::conj(bound.phi1.data[i]);
            x.a.data[i] = c;
            x.b.data[i] = I * c;
        }
        scale8(x, cplx(1.0 / norm8(x), 0));

        long dim = x.a.data.size() + x.b.data.size();
        auto pack = [&](const CField8& f, CVec& y) {
            y.resize(dim);
            std::copy(f.a.data.begin(), f.a.data.end(), y.begin());
            std::copy(f.b.data.begin(), f.b.data.end(), y.begin() + f.a.data.size());
        };
        auto unpack = [&](const CVec& y) {
            CField8 f(g);
            std::copy(y.begin(), y.begin() + f.a.data.size(), f.a.data.begin());
            std::copy(y.begin() + f.a.data.size(), y.end(), f.b.data.begin());
            return f;
        };

        // free preconditioner: (L0 - mu)^{-1} exact in Fourier on the two
        // blocks; -k is the grid reflection (Nyquist components alias to
        // themselves on the discrete torus)
        auto reflect_k = [&](long p) {
            int n = g.n;
            int iz = static_cast<int>(p % n);
            int iy = static_cast<int>((p / n) % n);
            int ix = static_cast<int>(p / (static_cast<long>(n) * n));
            return g.k_at(g.index((n - ix) % n, (n - iy) % n, (n - iz) % n));
        };
        auto precond_once = [&](const CField8& f, cplx shift) {
            SpinorField v, w;
            holo_split(f, v, w);
            SpinorField vh = to_momentum(v), wh = to_momentum(w);
            Eigen::Vector4cd vv;
            for (long p = 0; p < g.npoints(); ++p) {
                Vec3 k = g.k_at(p);
                Mat4 h = symbol_at(dm, k).h;
                // v-block: L0 = -i(h - E); w-block: L0 = +i(conj h(-k) - E)
                Mat4 Av = -cplx(0, 1) * (h - fr.E * Mat4::Identity()) -
                          shift * Mat4::Identity();
                cplx* dv = vh.at(p);
                vv << dv[0], dv[1], dv[2], dv[3];
                Eigen::Vector4cd sv = Av.colPivHouseholderQr().solve(vv);
                for (int c = 0; c < 4; ++c) dv[c] = sv[c];

                Mat4 hbar = symbol_at(dm, reflect_k(p)).h.conjugate();
                Mat4 Aw = cplx(0, 1) * (hbar - fr.E * Mat4::Identity()) -
                          shift * Mat4::Identity();
                cplx* dw = wh.at(p);
                vv << dw[0], dw[1], dw[2], dw[3];
                Eigen::Vector4cd sw = Aw.colPivHouseholderQr().solve(vv);
                for (int c = 0; c < 4; ++c) dw[c] = sw[c];
            }
            return holo_merge(to_position(vh), to_position(wh));
        };

        cplx lam = mu;
        for (int it = 0; it < opt.max_inverse_iterations; ++it) {
            // inexact inverse iteration: the system is solved to modest
            // relative tolerance only — near the eigenvalue the solution is
            // amplified by 1/offset, so machine-level backward error is not
            // representable anyway
            cplx shift = lam + cplx(1e-3, 0);
            LinOp A = [&](const CVec& xx, CVec& yy) {
                CField8 f = unpack(xx);
                CField8 lf = fr.apply_L(f);
                axpy8(-shift, f, lf);
                pack(lf, yy);
            };
            LinOp P = [&](const CVec& xx, CVec& yy) {
                CField8 f = unpack(xx);
                pack(precond_once(f, shift), yy);
            };
            CVec bvec, yvec;
            pack(x, bvec);
            yvec.assign(dim, cplx(0, 0));
            SolveReport rep = gmres(A, bvec, yvec, 1e-8, 3000, 60, &P);
            if (!rep.converged)
                throw std::runtime_error("build_frame: eigen inverse iteration stalled");
            CField8 y = unpack(yvec);
            scale8(y, cplx(1.0 / norm8(y), 0));
            // Rayleigh quotient
            CField8 ly = fr.apply_L(y);
            cplx lam_new = inner8(y, ly);
            CField8 res = ly;
            axpy8(-lam_new, y, res);
            double rn = norm8(res);
            x = y;
            lam = lam_new;
            if (rn < opt.eigen_tol) break;
            if (it + 1 == opt.max_inverse_iterations)
                throw std::runtime_error("build_frame: eigenpair not converged");
        }
        // phase convention: <seed-type, S1+> real positive via largest entry
        size_t imax = 0;
        double amax = 0;
        for (size_t i = 0; i < x.a.data.size(); ++i)
            if (std::abs(x.a.data[i]) > amax) { amax = std::abs(x.a.data[i]); imax = i; }
        cplx ph = x.a.data[imax] / amax;
        scale8(x, std::conj(ph) / std::abs(std::conj(ph)));

        fr.S1_plus = x;
        fr.E1_plus = lam;
        fr.S1_minus = conj8(x);
        fr.E1_minus = std::conj(lam);
    }

    // modulation basis: dS_x = realify(dS_r), dS_y = realify(i S)/r (gauge),
    // at r = 0 the gauge direction degenerates to realify(i phi0)
    fr.basis[0] = embed_complex(fr.dS_r);
    SpinorField gauge_dir =
        (r > 0) ? scaled(fr.S, cplx(0, 1.0 / r)) : scaled(bound.phi0, cplx(0, 1));
    fr.basis[1] = embed_complex(gauge_dir);
    fr.basis[2] = fr.S1_plus;
    fr.basis[3] = fr.S1_minus;
    for (int i = 0; i < 4; ++i) fr.zeta[i] = apply_Jdyn(fr.basis[i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) fr.gram(i, j) = inner8(fr.zeta[i], fr.basis[j]);
    fr.gram_inv = fr.gram.inverse();
    return fr;
}

KernelCheckReport generalized_kernel_check(const LinearizedFrame& frame) {
    KernelCheckReport rep;
    rep.dE_dr = frame.dE_dr;
    CField8 s8 = embed_complex(frame.S);
    CField8 js = apply_Jdyn(s8);
    rep.gauge_direction_residual = norm8(frame.apply_L(js));
    CField8 ds = embed_complex(frame.dS_r);
    CField8 lds = frame.apply_L(ds);
    axpy8(cplx(-frame.dE_dr, 0), js, lds);
    rep.scaling_direction_residual = norm8(lds);
    return rep;
}

LinearizedFlow::LinearizedFlow(const LinearizedFrame& frame, double dt)
    : frame_(&frame), dt_(dt) {
    const Grid& g = frame.S.grid;
    exp_half_.resize(g.npoints());
    exp_half_adj_.resize(g.npoints());
    Mat8 jd = Mat8::Zero();
    for (int c = 0; c < 4; ++c) {
        jd(c, 4 + c) = 1.0;   // J_dyn (a;b) = (b;-a)
        jd(4 + c, c) = -1.0;
    }
    for (long p = 0; p < g.npoints(); ++p) {
        Mat8 gen = jd * frame.pointwise[p];
        exp_half_[p] = (0.5 * dt_ * gen).exp();
        // backward-adjoint flow e^{-dt H J_dyn}: pointwise generator
        // -B J_dyn = +(J_dyn B)^T
        exp_half_adj_[p] = (0.5 * dt_ * gen.transpose()).exp();
    }
}

void LinearizedFlow::pointwise_half(CField8& g, const std::vector<Mat8>& table) const {
    apply_pointwise8(table, g);
}

void LinearizedFlow::fourier_full(CField8& g, double tau, bool adjoint) const {
    // e^{tau J_dyn realify(D-E)} = realify(e^{-i tau (D-E)}); the free part
    // commutes with J_dyn, so the backward-adjoint flow just runs it with
    // tau negated
    (void)adjoint;
    const DiracMatrices& dm = *frame_->dm;
    double E = frame_->E;
    auto T = [&](const SpinorField& f) {
        SpinorField out = free_flow(dm, f, tau);
        return scaled(out, std::exp(cplx(0, tau * E)));
    };
    g = apply_realified(T, g);
}

void LinearizedFlow::step(CField8& g) const {
    pointwise_half(g, exp_half_);
    fourier_full(g, dt_, false);
    pointwise_half(g, exp_half_);
}

void LinearizedFlow::step_adjoint_backward(CField8& g) const {
    // one dt of e^{-t H J_dyn} = e^{+t L^*} (the wave-operator backward flow)
    pointwise_half(g, exp_half_adj_);
    fourier_full(g, -dt_, false);
    pointwise_half(g, exp_half_adj_);
}

SemigroupDiagnostics linearized_semigroup_diagnostics(const LinearizedFrame& frame,
                                                      const CField8& f0, double T,
                                                      double dt, double sigma, double s,
                                                      double fit_lo, double fit_hi) {
    SemigroupDiagnostics diag;
    CField8 g = frame.project_continuous(f0);
    double fnorm = norm8(g);
    LinearizedFlow flow(frame, dt);
    int steps = static_cast<int>(std::ceil(T / dt));
    double kato = 0.0;
    int sample_every = std::max(1, steps / 200);
    auto wnorm = [&](const CField8& x) {
        SpinorField xa = polynomial_weight(x.a, -sigma);
        SpinorField xb = polynomial_weight(x.b, -sigma);
        return std::sqrt(norm2(xa) * norm2(xa) + norm2(xb) * norm2(xb));
    };
    auto hsnorm = [&](const CField8& x) {
        double na = weighted_sobolev_norm(x.a, 0, s);
        double nb = weighted_sobolev_norm(x.b, 0, s);
        return std::sqrt(na * na + nb * nb);
    };
    double prev_w = wnorm(g);
    for (int i = 0; i < steps; ++i) {
        flow.step(g);
        double t = (i + 1) * dt;
        double w = wnorm(g);
        kato += 0.5 * (prev_w * prev_w + w * w) * dt;  // trapezoid
        prev_w = w;
        if (i % sample_every == 0 || i + 1 == steps) {
            diag.weighted_decay.t.push_back(t);
            diag.weighted_decay.value.push_back(w);
            diag.hs_times.push_back(t);
            diag.hs_norms.push_back(hsnorm(g));
        }
        if (std::abs(t - T / 2) < 0.51 * dt) diag.kato_ratio_T = kato / (fnorm * fnorm);
    }
    diag.kato_ratio_2T = kato / (fnorm * fnorm);
    fit_decay(diag.weighted_decay, fit_lo, fit_hi);
    std::vector<double> lt, ln;
    for (size_t i = 0; i < diag.hs_times.size(); ++i) {
        if (diag.hs_times[i] < 0.5) continue;
        lt.push_back(std::log(diag.hs_times[i]));
        ln.push_back(std::log(diag.hs_norms[i]));
    }
    if (lt.size() >= 3) diag.hs_growth_slope = fit_line(lt, ln).slope;
    return diag;
}

SpinorField linear_h_flow(const DiracMatrices& dm, const Potential& V, double E,
                          const SpinorField& f, double T, double dt) {
    int steps = std::max(1, static_cast<int>(std::ceil(std::abs(T) / dt)));
    double tau = T / steps;
    std::vector<Mat4> expv;
    if (!V.is_zero()) {
        expv.resize(V.grid.npoints());
        for (long p = 0; p < V.grid.npoints(); ++p) {
            Mat4 m = cplx(0, -tau) * V.values[p];
            expv[p] = m.exp();
        }
    }
    SpinorField g = f;
    const cplx ephase = std::exp(cplx(0, tau * E));
    for (int i = 0; i < steps; ++i) {
        g = free_flow(dm, g, tau / 2);
        if (!expv.empty()) {
            Eigen::Vector4cd v;
            for (long p = 0; p < g.grid.npoints(); ++p) {
                cplx* d = g.at(p);
                v << d[0], d[1], d[2], d[3];
                Eigen::Vector4cd w = expv[p] * v;
                for (int c = 0; c < 4; ++c) d[c] = w[c];
            }
        }
        g = free_flow(dm, g, tau / 2);
        for (auto& z : g.data) z *= ephase;
    }
    return g;
}

WaveOperatorReport wave_operator_finiteT(const LinearizedFrame& frame,
                                         const BoundStateSet& bound,
                                         const SpinorField& f, double T, double dt,
                                         const std::vector<double>& intertwine_times,
                                         bool also_2T) {
    WaveOperatorReport rep;
    const DiracMatrices& dm = *frame.dm;
    const Potential& V = *frame.V;

    auto WT = [&](double horizon, const SpinorField& f0) {
        // both flows must share one exact time grid
        int steps = std::max(1, static_cast<int>(std::round(horizon / dt)));
        double tau = horizon / steps;
        SpinorField y = project_continuous_h(bound, f0);
        y = linear_h_flow(dm, V, frame.E, y, horizon, tau);
        CField8 g = embed_complex(y);
        LinearizedFlow flow(frame, tau);
        for (int i = 0; i < steps; ++i) flow.step_adjoint_backward(g);
        return g;
    };

    CField8 w1 = WT(T, f);
    rep.wf = real_part(w1);
    if (also_2T) {
        CField8 w2 = WT(2 * T, f);
        axpy8(cplx(-1, 0), w1, w2);
        rep.cauchy_increment = norm8(w2);
    }
    // range: W_T f should live in ran P_c(u)
    CField8 pcw = frame.project_continuous(w1);
    axpy8(cplx(-1, 0), w1, pcw);
    rep.range_defect = norm8(pcw) / std::max(norm2(f), 1e-300);

    // intertwining: the backward-adjoint flow pairs with the time-reversed
    // linear flow, e^{-s H J} P_c^* W = W e^{+is(H-E)} P_c
    for (double s : intertwine_times) {
        CField8 lhs = frame.project_continuous_adjoint(w1);
        int steps = std::max(1, static_cast<int>(std::round(s / dt)));
        double tau = s / steps;
        LinearizedFlow flow(frame, tau);
        for (int i = 0; i < steps; ++i) flow.step_adjoint_backward(lhs);
        SpinorField fs = linear_h_flow(dm, V, frame.E, project_continuous_h(bound, f),
                                       -s, dt);
        CField8 rhs = WT(T, fs);
        axpy8(cplx(-1, 0), rhs, lhs);
        rep.intertwining_residuals.push_back(norm8(lhs) / std::max(norm2(f), 1e-300));
    }
    return rep;
}

}  // namespace nlde
