#pragma once

#include "nlde/linearized.hpp"

namespace nlde {

struct EvolveOptions {
    double dt = 0.0;          // <= 0: 0.02 * 2 pi / lambda_max(grid)
    double blowup_factor = 10.0;
    std::function<void(double, const SpinorField&)> checkpoint;  // optional
    double checkpoint_every = 0.0;  // <= 0: no checkpoints
};

/// Full NLDE flow by Strang splitting: exact free half-steps in Fourier,
/// pointwise 4x4 exponential of V and the exact gauge-phase flow of the
/// quartic nonlinearity in between. Charge is conserved to roundoff.
SpinorField evolve_nlde(const SpinorField& psi0, double T, const DiracMatrices& dm,
                        const Potential& V, const NonlinearityModel& model,
                        const EvolveOptions& opt = {});

double default_dt(const Grid& g, double mass);

/// Interpolated frame table over the radial ray, with phases aligned along
/// r so interpolation is smooth; frames at complex u are gauge rotations.
class FrameTable {
  public:
    FrameTable() = default;
    FrameTable(const PlsManifold& man, const DiracMatrices& dm, const Potential& V,
               double r_max, int nodes, const FrameOptions& opt = {});

    const PlsManifold& manifold() const { return *man_; }
    const DiracMatrices& dirac() const { return *dm_; }
    const Potential& potential() const { return *V_; }

    /// Frame at real r (interpolated fields; Gram recomputed).
    LinearizedFrame frame(double r) const;
    /// Frame at complex u: gauge rotation of frame(|u|).
    LinearizedFrame frame_at(cplx u) const;
    cplx E1_plus(double r) const;

  private:
    const PlsManifold* man_ = nullptr;
    const DiracMatrices* dm_ = nullptr;
    const Potential* V_ = nullptr;
    std::vector<double> r_;
    std::vector<LinearizedFrame> frames_;
    friend LinearizedFrame gauge_rotated_frame(const LinearizedFrame&, double);
};

LinearizedFrame gauge_rotated_frame(const LinearizedFrame& fr, double theta);

/// (u, alpha+, alpha-, z) coordinates of a trajectory point; z is the real
/// continuous-subspace remainder, phase = accumulated int E(u).
struct ModulationState {
    double t = 0.0;
    cplx u{0, 0};
    cplx alpha_plus{0, 0};
    cplx alpha_minus{0, 0};
    RealSpinorField z;
    double phase = 0.0;
};

struct DecomposeResult {
    cplx u;
    SpinorField eta;   // complex residual psi - S(u)
    double constraint_residual = 0.0;
    int newton_iterations = 0;
};

/// Newton solve of the two symplectic constraints <J eta, dS_i(u)> = 0.
DecomposeResult modulation_decompose(const SpinorField& psi, const FrameTable& frames,
                                     cplx u_guess, double tol = 1e-12,
                                     int max_iter = 40);

struct EtaSplit {
    cplx alpha_plus{0, 0};
    cplx alpha_minus{0, 0};
    RealSpinorField z;
    double discrete_leak = 0.0;  // |dS-coefficients| (should vanish under the constraint)
    double reassembly_error = 0.0;
};

EtaSplit split_eta(const RealSpinorField& eta, const LinearizedFrame& frame);

/// N(u, eta) and the 2x2 matrix A(u, eta) of the modulation system.
struct ModulationCoefficients {
    RealSpinorField N;
    Eigen::Matrix2d A;
    Eigen::Matrix2d M;  // A = M^{-1}
};
ModulationCoefficients modulation_coefficients(const LinearizedFrame& frame,
                                               const RealSpinorField& eta,
                                               const NonlinearityModel& model);

struct ModulationRhs {
    cplx udot{0, 0};
    cplx alpha_plus_dot{0, 0};
    cplx alpha_minus_dot{0, 0};
    RealSpinorField zdot;
};

/// Time derivatives of (u, alpha±, z): direct differentiation of the
/// frame-dual decomposition along the exact eta-flow, with the frame-motion
/// terms from centered differences of the frame table.
ModulationRhs modulation_rhs(const ModulationState& st, const FrameTable& frames,
                             double fd_step = 1e-4);

/// Integrates the modulation system with RK4 (route B of the master
/// consistency check); returns states at the sample times.
std::vector<ModulationState> integrate_modulation(const ModulationState& initial,
                                                  const FrameTable& frames, double T,
                                                  double dt,
                                                  const std::vector<double>& sample_times);

/// Decompose a full PDE trajectory into gauge-aligned modulation states
/// (route A): psi(t) = e^{-i theta}(S(u) + eta) with theta from route B or
/// accumulated internally.
ModulationState decompose_full_state(const SpinorField& psi, double t, double phase,
                                     const FrameTable& frames, cplx u_guess);

// ---- stable-manifold shooting (the §5 fixed point) ----

struct TrajectoryMonitors {
    DecaySeries u_drift;       // |u(t) - u_inf|
    DecaySeries alpha_mod;     // |alpha(t)|
    DecaySeries z_weighted;    // ||z||_{H^s_{-sigma}}
    DecaySeries z_besov;       // ||z||_{B^beta_{inf,2}}
    std::vector<double> z_hsprime;  // sup-norm monitor series
    double sup_z_hsprime = 0.0;
    bool finite = true;
};

struct ShootResult {
    cplx psi_coefficient{0, 0};   // the excited-direction correction Psi(v0, xi0)
    cplx v0_effective{0, 0};      // U0 of the constructed initial state
    double xi0_norm_effective = 0.0;
    cplx u_infinity{0, 0};
    std::vector<ModulationState> trajectory;  // thinned
    std::vector<double> times;
    TrajectoryMonitors monitors;
    int outer_iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
    SpinorField psi0;             // the constructed initial state
};

struct ShootOptions {
    double T = 16.0;
    double dt = 0.0;          // <= 0: default_dt
    int max_outer = 12;
    double tol = 1e-7;        // joint fixed-point delta
    double damping = 0.7;
    int store_every = 4;      // z snapshots kept every k steps
    double sigma = 3.0;       // monitor norms
    double s_weighted = 0.5;
    double beta = 0.5;
    double sprime = 3.5;
    double fit_lo = 0.0, fit_hi = 0.0;  // <= 0: [T/10, T/2... see impl]
};

ShootResult shoot_stable_manifold(cplx v0, const SpinorField& xi0,
                                  const FrameTable& frames,
                                  const BoundStateSet& bound,
                                  const ShootOptions& opt);

struct AsymptoticProfile {
    cplx v_inf{0, 0};
    double E_inf = 0.0;
    SpinorField xi_inf;
    SpinorField xi_tilde_inf;       // free-Dirac pullback variant (optional)
    bool has_free_profile = false;
    DecaySeries eps_weighted;       // ||eps(t)||_{H^s_{-sigma}}
    DecaySeries eps_besov;          // ||eps(t)||_{B^beta_{inf,2}}
    std::vector<double> eps_hsprime;
    double pullback_cauchy = 0.0;   // ||pullback(T) - pullback(T/2)||
    double xi_inf_pc_defect = 0.0;  // ||(1 - P_c(H)) xi_inf||
};

AsymptoticProfile asymptotic_extract(const ShootResult& shot, const FrameTable& frames,
                                     const BoundStateSet& bound, double dt,
                                     bool free_profile = false);

}  // namespace nlde
