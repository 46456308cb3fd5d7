#pragma once

#include "nlde/grid.hpp"

namespace nlde {

enum class NonlinearityFamily { SolerQuartic, DensityQuartic };

using Vec4c = Eigen::Vector4cd;
using Mat8 = Eigen::Matrix<double, 8, 8>;

/// Gauge-invariant quartic nonlinearities F : C^4 -> R and their first
/// three differentials in the real structure of C^4 (R^8 polynomials).
/// soler_quartic: F = kappa <beta z, z>^2;  density_quartic: F = kappa |z|^4.
struct NonlinearityModel {
    NonlinearityFamily family = NonlinearityFamily::SolerQuartic;
    double kappa = 5.0;

    double F(const Vec4c& z) const;
    Vec4c gradF(const Vec4c& z) const;                       // DF(v)h = Re<gradF, h>
    Vec4c d2F(const Vec4c& z, const Vec4c& h) const;         // R-linear in h
    Vec4c d3F(const Vec4c& z, const Vec4c& h, const Vec4c& w) const;

    /// 8x8 real matrix of the R-linear map d2F(z) in the realified basis.
    Mat8 d2F_matrix(const Vec4c& z) const;

    /// gradF applied pointwise to a field.
    SpinorField gradF_field(const SpinorField& f) const;
    /// d2F(S(x)) h(x) pointwise.
    SpinorField d2F_field(const SpinorField& s, const SpinorField& h) const;
    /// N(u, eta) = gradF(S + eta) - gradF(S) - d2F(S) eta pointwise.
    SpinorField remainder_field(const SpinorField& s, const SpinorField& eta) const;
};

}  // namespace nlde
