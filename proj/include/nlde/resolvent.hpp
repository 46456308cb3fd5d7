#pragma once

#include <optional>

#include "nlde/linalg.hpp"
#include "nlde/operators.hpp"

namespace nlde {

enum class ResolventSolver { IterativeSolve, BornSeries };

struct ResolventQuery {
    cplx z;
    int side = +1;  // which boundary value the caller is approaching
    ResolventSolver solver = ResolventSolver::IterativeSolve;
    double tol = 1e-10;
    int max_iter = 2000;
};

/// R_V(z) f = (D_m + V - z)^{-1} f through the Fredholm form
/// (1 + R_0(z) V) u = R_0(z) f: a GMRES solve whose operator is the free
/// resolvent symbol composed with V (identity plus compact). The optional
/// Born route iterates u <- R_0 f - R_0 V u and fails loudly when the
/// iteration stops contracting.
SpinorField perturbed_resolvent(const DiracMatrices& dm, const ResolventQuery& q,
                                const Potential& V, const SpinorField& f,
                                SolveReport* report = nullptr);

/// Smallest gap between the query lambda and the grid symbol values
/// ±lambda(k) near it: the scale below which epsilon fakes the continuum.
double grid_spectral_spacing(const DiracMatrices& dm, const Grid& g, double lambda);

struct BoundaryValueOptions {
    double eps0 = 0.4;        // first epsilon of the geometric schedule
    double ratio = 0.5;       // schedule ratio
    double eps_min_factor = 4.0;  // eps_min = factor * grid spectral spacing
    double sigma_error = 3.0;     // L^2_{-sigma} norm for the error estimate
    double tol = 1e-9;
    int max_iter = 4000;
};

struct BoundaryValue {
    SpinorField value;            // Richardson-extrapolated limit
    double error = 0.0;           // from the last two extrapolants, L^2_{-sigma}
    double eps_min = 0.0;
    std::vector<double> eps_used;
    bool diverged = false;        // lambda too close to an embedded feature
    int total_iterations = 0;
};

/// lim_{eps->0+} R_V(lambda ± i eps) f, Richardson-extrapolated along a
/// geometric epsilon schedule bounded below by the grid spectral spacing.
BoundaryValue boundary_value(const DiracMatrices& dm, double lambda, int side,
                             const Potential& V, const SpinorField& f,
                             const BoundaryValueOptions& opt = {});

/// Im R_V^+(lambda) f = (R_V(lambda+i eps) - R_V(lambda-i eps)) f / (2i),
/// extrapolated with the same schedule.
BoundaryValue imag_boundary_value(const DiracMatrices& dm, double lambda,
                                  const Potential& V, const SpinorField& f,
                                  const BoundaryValueOptions& opt = {});

struct ThresholdReport {
    std::vector<double> lambda_samples;  // strictly decreasing toward m
    std::vector<double> im_norms;        // operator-norm surrogates
    std::vector<double> eps_used;
    std::vector<double> extrapolation_errors;
    double fitted_exponent = 0.0;        // target 1/2
    double stderr_exponent = 0.0;
    double r2 = 0.0;
    bool inconclusive = false;
    double derivative_exponents[2] = {0.0, 0.0};  // l = 1, 2; targets 1/2 - l
};

/// Scans ||Im R_V^+(lambda)||_{L^2_sigma -> L^2_{-sigma}} (8 fixed-seed
/// probe vectors) against lambda - m on a log-log window. When a projector
/// is supplied the probes are restricted to it: the epsilon floor of the
/// finite box keeps the gap-eigenvalue Lorentzians alive at small
/// lambda - m unless they are projected out (in the true limit Im R^+ has
/// no pole contribution for lambda > m).
ThresholdReport threshold_scan(const DiracMatrices& dm, const Potential& V, double sigma,
                               const std::vector<double>& lambdas, unsigned seed = 2024,
                               int probes = 8,
                               const std::function<SpinorField(const SpinorField&)>*
                                   continuous_projector = nullptr,
                               const Grid* grid_for_free = nullptr);

/// Free resolvent at the threshold z = sign * m with the grid's singular
/// k = 0 band channel projected out (it carries zero continuum measure;
/// keeping it would make the finite box fake a resonance).
SpinorField threshold_free_resolvent(const DiracMatrices& dm, const SpinorField& f,
                                     int sign);

struct ResonanceReport {
    double sigma_min = 0.0;
    bool converged = false;
    bool pass = false;
    double threshold = 0.05;
};

/// Smallest singular value of M(m) = 1 + R_0(m) V on L^2_{-sigma}
/// (weighted similarity + inverse power iteration, matrix-free).
/// PASS certifies Assumption "no resonance / eigenvalue at threshold".
ResonanceReport resonance_detector(const DiracMatrices& dm, const Potential& V,
                                   double sigma, int sign = +1,
                                   double pass_threshold = 0.01, unsigned seed = 99);

/// <x>^sigma f pointwise.
SpinorField polynomial_weight(const SpinorField& f, double sigma);

}  // namespace nlde
