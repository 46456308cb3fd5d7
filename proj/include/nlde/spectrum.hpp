#pragma once

#include <optional>

#include "nlde/resolvent.hpp"

namespace nlde {

struct BoundStateSet {
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    SpinorField phi0;
    SpinorField phi1;
    double residual0 = 0.0;
    double residual1 = 0.0;
    double gap_margin = 0.0;       // min distance of {lambda0, lambda1} to ±m
    bool nonresonant = false;      // |lambda1-lambda0| < min(|lambda0±m|)
};

struct BoundStateOptions {
    std::vector<double> shifts;    // empty: scan the gap automatically
    int lanczos_steps = 24;
    double solver_tol = 1e-11;
    double residual_tol = 1e-9;
    double degeneracy_tol = 1e-6;
    // finite-box edge modes crowd ±m within O(1/L^3); gap states must stand
    // clear of the discretized continuum edge
    double edge_margin = 0.015;
};

/// All gap eigenvalues of H = D_m + V by shift-invert Lanczos with the
/// perturbed-resolvent Fredholm solve inside. Exactly two simple ones are
/// required; zero/too many reject the configuration, a degenerate pair
/// raises the Kramers obstruction.
BoundStateSet bound_states(const DiracMatrices& dm, const Potential& V,
                           const BoundStateOptions& opt = {});

/// Raw gap eigenpairs (diagnostics / configuration tuning).
std::vector<EigenPair> gap_eigenpairs(const DiracMatrices& dm, const Potential& V,
                                      const BoundStateOptions& opt = {});

/// One distorted plane wave column: psi_V^j(k,x) = psi_0^j - R_V^+(±lambda(k)) V psi_0^j
/// (+ for j in {1,2}, - for j in {3,4}; threshold-regularized at k = 0).
struct DistortedWave {
    SpinorField psi;       // full wave
    SpinorField w;         // scattered part, psi = e^{ikx}(u(k) + w-modulated)
    double pde_residual = 0.0;  // ||(H - lambda) psi||_{L^2_{-sigma}}
    double bv_error = 0.0;
};

DistortedWave distorted_wave(const DiracMatrices& dm, const Vec3& k, int j,
                             const Potential& V, const BoundStateSet* bound,
                             const BoundaryValueOptions& opt = {});

/// Table of distorted waves over the whole k-grid (4 channels per k),
/// stored as the analysis rows of the generalized Fourier transform.
/// Rows are projected onto ran P_c(H) and, when `parseval_polish` is on,
/// symmetrically renormalized so that F* F = P_c holds to working accuracy
/// (one Newton step for the inverse square root of the frame operator).
struct DistortedWaveTable {
    Grid grid;
    std::vector<SpinorField> rows;      // 4 * n^3 rows, channel-major per k
    std::vector<double> lambda_signed;  // +lambda(k) or -lambda(k) per row
    std::vector<double> pde_residuals;
    double max_bv_error = 0.0;
    std::uint64_t config_hash = 0;
    bool polished = false;

    long row_index(long p, int j) const { return 4 * p + j; }
};

struct WaveTableOptions {
    BoundaryValueOptions bv;
    int threads = 2;
    bool parseval_polish = true;
    int polish_iterations = 2;
    std::string cache_dir;  // empty: no caching
    std::uint64_t config_hash = 0;
};

DistortedWaveTable build_wave_table(const DiracMatrices& dm, const Potential& V,
                                    const BoundStateSet& bound,
                                    const WaveTableOptions& opt = {});

/// Forward transform: (F_V f)_j(k) = <psi_V^j(k, .), f>, a 4-channel field
/// on the k-grid (stored as a momentum-space SpinorField).
SpinorField generalized_fourier(const DistortedWaveTable& table, const SpinorField& f);

/// Adjoint: (F_V^* g)(x) = sum_k dk^3 sum_j psi_V^j(k, x) g_j(k).
SpinorField generalized_fourier_adjoint(const DistortedWaveTable& table,
                                        const SpinorField& g);

/// e^{-itH} chi(H) P_c f through the wave diagonalization: multiply the
/// transform by e^{-it s_j lambda(k)} chi(s_j lambda(k)) per channel.
SpinorField propagator_via_waves(const DistortedWaveTable& table, double t,
                                 const std::function<double(double)>& chi,
                                 const SpinorField& f);

/// P_c(H) f = f - phi0<phi0,f> - phi1<phi1,f>.
SpinorField project_continuous_h(const BoundStateSet& b, const SpinorField& f);

/// Dense-oracle eigen decomposition of H on a small grid (n = 8 scale).
Eigen::VectorXd dense_spectrum_oracle(const DiracMatrices& dm, const Potential& V,
                                      Eigen::MatrixXcd* vectors = nullptr);

}  // namespace nlde
