#include "nlde/dirac.hpp"

#include <cmath>

namespace nlde {

namespace {

Eigen::Matrix2cd pauli(int i) {
    Eigen::Matrix2cd s;
    const cplx I(0.0, 1.0);
    switch (i) {
        case 0: s << 0, 1, 1, 0; break;
        case 1: s << 0, -I, I, 0; break;
        default: s << 1, 0, 0, -1; break;
    }
    return s;
}

}  // namespace

DiracMatrices dirac_matrices(const std::string& representation_id, double mass) {
    if (representation_id != kStandardRepresentation)
        throw std::invalid_argument("unknown Dirac representation id: " + representation_id);
    if (!(mass > 0.0))
        throw std::invalid_argument("mass must be positive");

    DiracMatrices dm;
    dm.mass = mass;
    for (int i = 0; i < 3; ++i) {
        Mat4 a = Mat4::Zero();
        a.block<2, 2>(0, 2) = pauli(i);
        a.block<2, 2>(2, 0) = pauli(i);
        dm.alpha[i] = a;
    }
    Mat4 b = Mat4::Zero();
    b.block<2, 2>(0, 0) = Eigen::Matrix2cd::Identity();
    b.block<2, 2>(2, 2) = -Eigen::Matrix2cd::Identity();
    dm.beta = b;
    dm.alpha5 = dm.alpha[0] * dm.alpha[1] * dm.alpha[2] * dm.beta;
    return dm;
}

MomentumSymbol symbol_at(const DiracMatrices& dm, const Vec3& k) {
    if (!k.allFinite()) throw std::invalid_argument("symbol_at: non-finite k");
    MomentumSymbol s;
    s.k = k;
    s.h = k.x() * dm.alpha[0] + k.y() * dm.alpha[1] + k.z() * dm.alpha[2] + dm.mass * dm.beta;
    s.lambda = std::sqrt(k.squaredNorm() + dm.mass * dm.mass);

    Mat4 beta_alpha_k = dm.beta * (s.h - dm.mass * dm.beta);
    double norm = std::sqrt(2.0 * s.lambda * (dm.mass + s.lambda));
    s.u_fw = ((dm.mass + s.lambda) * Mat4::Identity() - beta_alpha_k) / norm;

    s.p_plus = 0.5 * (Mat4::Identity() + s.h / s.lambda);
    s.p_minus = 0.5 * (Mat4::Identity() - s.h / s.lambda);
    return s;
}

Mat4 free_propagator_symbol(const DiracMatrices& dm, const Vec3& k, double t) {
    MomentumSymbol s = symbol_at(dm, k);
    const cplx I(0.0, 1.0);
    return std::exp(-I * t * s.lambda) * s.p_plus + std::exp(I * t * s.lambda) * s.p_minus;
}

Mat4 free_resolvent_symbol(const DiracMatrices& dm, const Vec3& k, cplx z) {
    MomentumSymbol s = symbol_at(dm, k);
    cplx denom = s.lambda * s.lambda - z * z;
    if (std::abs(denom) < 1e-300 * (1.0 + std::norm(z)))
        throw std::domain_error("free_resolvent_symbol: z on the symbol spectrum");
    return (s.h + z * Mat4::Identity()) / denom;
}

Mat4 spectral_cutoff_symbol(const DiracMatrices& dm, const Vec3& k,
                            const std::function<double(double)>& chi) {
    MomentumSymbol s = symbol_at(dm, k);
    return chi(s.lambda) * s.p_plus + chi(-s.lambda) * s.p_minus;
}

}  // namespace nlde
