#pragma once

#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <Eigen/Dense>

namespace nlde {

using Mat4 = Eigen::Matrix4cd;
using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;

/// Constant Dirac algebra in the standard representation:
/// alpha_i = offdiag(sigma_i, sigma_i), beta = diag(I2, -I2),
/// alpha5 = alpha1 alpha2 alpha3 beta (hermitian, alpha5^2 = I,
/// anticommutes with every alpha_i and with beta).
struct DiracMatrices {
    std::array<Mat4, 3> alpha;
    Mat4 beta;
    Mat4 alpha5;
    double mass = 1.0;
};

/// Momentum-space symbol of the free operator at wave vector k:
/// h(k) = alpha.k + m beta, lambda(k) = sqrt(|k|^2 + m^2),
/// the Foldy-Wouthuysen rotation u(k) with u* h u = lambda beta,
/// and the band projectors P± = (1 ± h/lambda)/2.
struct MomentumSymbol {
    Vec3 k;
    double lambda;
    Mat4 h;
    Mat4 u_fw;
    Mat4 p_plus;
    Mat4 p_minus;
};

/// The only built-in representation id. Tests may construct rotated
/// representations directly through unitary conjugation of the result.
inline constexpr const char* kStandardRepresentation = "dirac-standard";

DiracMatrices dirac_matrices(const std::string& representation_id, double mass = 1.0);

MomentumSymbol symbol_at(const DiracMatrices& dm, const Vec3& k);

/// e^{-it lambda} P+ + e^{+it lambda} P-  (unitary for real t).
Mat4 free_propagator_symbol(const DiracMatrices& dm, const Vec3& k, double t);

/// (h(k) - z)^{-1} = (h(k) + z) / (|k|^2 + m^2 - z^2).
/// Throws if z lies on the symbol spectrum {±lambda(k)}.
Mat4 free_resolvent_symbol(const DiracMatrices& dm, const Vec3& k, cplx z);

/// chi(lambda) P+ + chi(-lambda) P-  (functional calculus of the symbol).
Mat4 spectral_cutoff_symbol(const DiracMatrices& dm, const Vec3& k,
                            const std::function<double(double)>& chi);

}  // namespace nlde
