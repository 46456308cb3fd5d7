#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "nlde/dirac.hpp"
#include "nlde/fitting.hpp"

namespace nlde {

/// Smoothness classes of Lemma-3.1-type sphere integrands, ordered by the
/// decay rate of J_v(k): C1 generic -> k^{-1}, C2 vanishing at ±v ->
/// k^{-3/2}, C2 supported away from ±v -> k^{-2}.
enum class SphereClass { C1Generic, C2VanishingAtPoles, C2SupportedAway };

struct SphereIntegrand {
    std::function<cplx(const Vec3&)> f;  // function on S^2 (unit vectors)
    SphereClass smoothness_class = SphereClass::C1Generic;
    Vec3 v = Vec3(0, 0, 1);  // pole of the phase k(1 - v.omega)

    /// Sampling verification of the class claim: |f(±v)| <= 1e-10 for the
    /// vanishing class, positive support distance for the away class.
    /// Throws std::invalid_argument on violation.
    void verify_class() const;
    /// Angular distance (radians) from ±v to the sampled support.
    double support_distance() const;
};

struct QuadratureResult {
    cplx value{0.0, 0.0};
    double error = 0.0;  // a posteriori estimate from resolution doubling
};

/// J_v(k) = int_{S^2} e^{ik(1 - v.omega)} f(omega) domega, adaptive
/// Gauss-Legendre in cos(phi) x uniform theta after rotating v to the pole;
/// resolution grows with |k| (>= ~10 nodes per oscillation).
/// `resolution_multiplier` scales the node counts (tests use it for
/// a posteriori validity checks).
QuadratureResult sphere_integral_J(const SphereIntegrand& s, double k,
                                   double resolution_multiplier = 1.0);

/// I(k,u) = int_{R^3} e^{ik(h(|xi|) - xi.u)} g(xi) dxi over the radial band
/// [band_lo, band_hi] that supports g. `radial` marks g depending on |xi|
/// only, enabling the exact angular reduction to 4 pi sinc(k rho |u|).
struct ConeIntegrand {
    std::function<cplx(const Vec3&)> g;
    std::function<double(double)> h;          // radial phase, e.g. sqrt(rho^2+m^2)
    double hprime_bound = 1.0;                // sup |h'| on the band
    double band_lo = 0.0;
    double band_hi = 1.0;
    bool radial = false;
    std::function<cplx(double)> g_radial;     // used when radial = true
};

QuadratureResult cone_integral_I(const ConeIntegrand& c, double k, const Vec3& u,
                                 double resolution_multiplier = 1.0);

/// K_j(x, t) = int e^{-it sqrt(xi^2+m^2) + i x.xi} chi_j(sqrt(xi^2+m^2)) dxi
/// with chi_j the dyadic annulus bump (same bump as the Besov partition).
QuadratureResult free_kernel_K(int j, double abs_x, double t, double mass,
                               double resolution_multiplier = 1.0);

/// sup over |x| <= x_max of |K_j(x, t)| on a search lattice refined around
/// the maximizer; x_max <= 0 selects the band's light cone automatically.
double free_kernel_sup(int j, double t, double mass, double x_max = 0.0, int coarse = 64);

/// Least-squares slope of log|value| vs log<k> (envelope over log-spaced
/// windows); PASS iff slope <= class_exponent + 0.15. Requires >= 1.5
/// decades of abscissa.
struct BoundClassFit {
    double slope = 0.0;
    double class_exponent = 0.0;
    bool pass = false;
    LineFit fit;
};

BoundClassFit bound_class_fit(const std::vector<double>& abscissa,
                              const std::vector<double>& magnitude,
                              double class_exponent);

double class_exponent(SphereClass c);

/// Lebesgue measure of {rho in [lo,hi] : |f(rho)| <= alpha}, sampled.
double sublevel_measure(const std::function<double(double)>& f, double lo, double hi,
                        double alpha, int samples = 200000);

}  // namespace nlde
