#pragma once

#include "nlde/nonlinearity.hpp"
#include "nlde/spectrum.hpp"

namespace nlde {

/// One point (u, S(u), h(u), E(u)) of the standing-wave manifold
/// S(u) = u phi0 + h(u), H S + gradF(S) = E S, h ⊥ phi0.
struct PLSPoint {
    cplx u{0.0, 0.0};
    SpinorField S;
    SpinorField h_part;
    double E = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

struct PLSOptions {
    double tol = 1e-11;      // fixed-point tolerance on the PLSE residual
    int max_iter = 60;
    double relax = 0.5;      // damping factor when the undamped map overshoots
    double solver_tol = 1e-12;
};

/// Lyapunov-Schmidt fixed point at complex amplitude u: solved on the real
/// ray (E(u) = E(|u|)), general u recovered by gauge rotation.
/// Throws when |u| leaves the contraction region.
PLSPoint solve_pls(cplx u, const NonlinearityModel& model, const DiracMatrices& dm,
                   const Potential& V, const BoundStateSet& bound,
                   const PLSOptions& opt = {}, const SpinorField* warm_h = nullptr);

/// Radial table of the manifold on [0, r_max]: S(r), E(r) and their first
/// two radial derivatives by centered differences, cubically interpolated.
/// Everything downstream (frames, modulation, shooting) reads from here.
class PlsManifold {
  public:
    PlsManifold() = default;
    PlsManifold(const NonlinearityModel& model, const DiracMatrices& dm,
                const Potential& V, const BoundStateSet& bound, double r_max,
                int nodes, const PLSOptions& opt = {});

    double r_max() const { return r_max_; }
    const BoundStateSet& bound() const { return *bound_; }
    const NonlinearityModel& model() const { return model_; }

    /// S, S', S'' and E, E' at radial amplitude r (interpolated).
    SpinorField S(double r) const;
    SpinorField dS_dr(double r) const;
    SpinorField d2S_dr2(double r) const;
    double E(double r) const;
    double dE_dr(double r) const;

    /// Gauge-rotated point at complex u.
    PLSPoint at(cplx u) const;

  private:
    std::vector<double> r_;
    std::vector<PLSPoint> pts_;
    std::vector<SpinorField> dS_, d2S_;
    std::vector<double> dE_;
    double r_max_ = 0.0;
    const BoundStateSet* bound_ = nullptr;
    NonlinearityModel model_;

    SpinorField interp(const std::function<const SpinorField&(int)>& tab, double r) const;
    double interp1(const std::vector<double>& tab, double r) const;
};

struct PLSPropertiesReport {
    double max_gauge_residual = 0.0;       // PLSE residual of rotated points
    double max_E_phase_dependence = 0.0;   // |E(e^{i theta} u) - E(|u|)|
    double h_slope = 0.0;                  // log||h|| vs log|u|, target 2
    double E_slope = 0.0;                  // log|E-lambda0| vs log|u|, target 2
    double decay_rate_S = 0.0;             // fitted spatial decay of S
    double decay_rate_dS = 0.0;            // and of the radial derivative
    double agmon_rate = 0.0;               // sqrt(m^2 - E^2) reference
    bool pass = true;
    std::string failure;
};

PLSPropertiesReport pls_properties_check(const PlsManifold& man,
                                         const DiracMatrices& dm, const Potential& V,
                                         const std::vector<double>& amplitudes,
                                         const std::vector<double>& phases);

}  // namespace nlde
