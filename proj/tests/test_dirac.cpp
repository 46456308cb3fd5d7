#include "doctest.h"

#include <random>

#include "nlde/dirac.hpp"

using namespace nlde;

namespace {
Vec3 random_k(std::mt19937_64& rng, double scale = 5.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return Vec3(u(rng), u(rng), u(rng));
}
}  // namespace

TEST_CASE("anticommutation relations hold to machine precision") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
            Mat4 ac = dm.alpha[i] * dm.alpha[k] + dm.alpha[k] * dm.alpha[i];
            Mat4 expect = (i == k) ? Mat4(2.0 * Mat4::Identity()) : Mat4(Mat4::Zero());
            CHECK((ac - expect).norm() < 1e-14);
        }
        CHECK((dm.alpha[i] * dm.beta + dm.beta * dm.alpha[i]).norm() < 1e-14);
        CHECK((dm.alpha[i] - dm.alpha[i].adjoint()).norm() < 1e-14);
        CHECK(std::abs(dm.alpha[i].trace()) < 1e-14);
        CHECK(std::abs((dm.beta * dm.alpha[i]).trace()) < 1e-14);
    }
    CHECK((dm.beta * dm.beta - Mat4::Identity()).norm() < 1e-14);
    CHECK((dm.beta - dm.beta.adjoint()).norm() < 1e-14);
}

TEST_CASE("beta is diag(1,1,-1,-1) and alpha1 has the sigma1 block form") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Mat4 b = Mat4::Zero();
    b(0, 0) = 1; b(1, 1) = 1; b(2, 2) = -1; b(3, 3) = -1;
    CHECK((dm.beta - b).norm() == 0.0);
    CHECK(dm.alpha[0](0, 3) == cplx(1, 0));
    CHECK(dm.alpha[0](1, 2) == cplx(1, 0));
    CHECK(dm.alpha[0](3, 0) == cplx(1, 0));
    CHECK(dm.alpha[0](0, 2) == cplx(0, 0));
}

TEST_CASE("alpha5 squares to a scalar and anticommutes with beta") {
    // explicit 4x4 multiplication oracle
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Mat4 sq = dm.alpha5 * dm.alpha5;
    cplx phase = sq(0, 0);
    CHECK(std::abs(std::abs(phase) - 1.0) < 1e-14);
    CHECK((sq - phase * Mat4::Identity()).norm() < 1e-14);
    CHECK((dm.alpha5 * dm.beta + dm.beta * dm.alpha5).norm() < 1e-14);
    for (int i = 0; i < 3; ++i)
        CHECK((dm.alpha5 * dm.alpha[i] + dm.alpha[i] * dm.alpha5).norm() < 1e-14);
}

TEST_CASE("unknown representation id is rejected") {
    CHECK_THROWS_AS(dirac_matrices("weyl"), std::invalid_argument);
}

TEST_CASE("symbol at k=0: h = m beta, u = I, P± = (I ± beta)/2") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation, 1.3);
    MomentumSymbol s = symbol_at(dm, Vec3::Zero());
    CHECK(s.lambda == doctest::Approx(1.3).epsilon(1e-15));
    CHECK((s.h - 1.3 * dm.beta).norm() < 1e-14);
    CHECK((s.u_fw - Mat4::Identity()).norm() < 1e-14);
    CHECK((s.p_plus - 0.5 * (Mat4::Identity() + dm.beta)).norm() < 1e-14);
}

TEST_CASE("symbol invariants on random k") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t) {
        Vec3 k = random_k(rng);
        MomentumSymbol s = symbol_at(dm, k);
        double lam2 = k.squaredNorm() + 1.0;
        CHECK((s.h * s.h - lam2 * Mat4::Identity()).norm() < 1e-12 * lam2);
        CHECK((s.u_fw * s.u_fw.adjoint() - Mat4::Identity()).norm() < 1e-13);
        // direct 4x4 multiplication oracle for the diagonalization
        Mat4 d = s.u_fw.adjoint() * s.h * s.u_fw;
        CHECK((d - s.lambda * dm.beta).norm() < 1e-13 * s.lambda);
        CHECK((s.p_plus + s.p_minus - Mat4::Identity()).norm() < 1e-13);
        CHECK((s.p_plus * s.p_minus).norm() < 1e-13);
        CHECK((s.p_plus * s.p_plus - s.p_plus).norm() < 1e-13);
    }
}

TEST_CASE("propagator symbol: identity at t=0, unitary, diagonalization oracle") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    std::mt19937_64 rng(11);
    CHECK((free_propagator_symbol(dm, Vec3(0.3, -1, 2), 0.0) - Mat4::Identity()).norm() < 1e-14);
    for (int t = 0; t < 50; ++t) {
        Vec3 k = random_k(rng);
        double tt = std::uniform_real_distribution<double>(-5, 5)(rng);
        Mat4 U = free_propagator_symbol(dm, k, tt);
        CHECK((U * U.adjoint() - Mat4::Identity()).norm() < 1e-13);
        MomentumSymbol s = symbol_at(dm, k);
        Eigen::Vector4cd ph;
        const cplx I(0, 1);
        ph << std::exp(-I * tt * s.lambda), std::exp(-I * tt * s.lambda),
              std::exp(I * tt * s.lambda), std::exp(I * tt * s.lambda);
        Mat4 Udiag = s.u_fw * ph.asDiagonal() * s.u_fw.adjoint();
        CHECK((U - Udiag).norm() < 1e-13);
    }
}

TEST_CASE("propagator group law") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    std::mt19937_64 rng(13);
    for (int t = 0; t < 50; ++t) {
        Vec3 k = random_k(rng);
        double t1 = std::uniform_real_distribution<double>(-3, 3)(rng);
        double t2 = std::uniform_real_distribution<double>(-3, 3)(rng);
        Mat4 lhs = free_propagator_symbol(dm, k, t1 + t2);
        Mat4 rhs = free_propagator_symbol(dm, k, t1) * free_propagator_symbol(dm, k, t2);
        CHECK((lhs - rhs).norm() < 1e-12);
    }
}

TEST_CASE("resolvent symbol: z=0 case, inverse identity, Prop-2.4 scalar form") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    std::mt19937_64 rng(17);
    Vec3 k0(1.0, 2.0, -0.5);
    MomentumSymbol s0 = symbol_at(dm, k0);
    Mat4 r0 = free_resolvent_symbol(dm, k0, cplx(0, 0));
    CHECK((r0 - s0.h / (k0.squaredNorm() + 1.0)).norm() < 1e-14);
    for (int t = 0; t < 50; ++t) {
        Vec3 k = random_k(rng);
        cplx z(std::uniform_real_distribution<double>(-2, 2)(rng),
               std::uniform_real_distribution<double>(0.1, 2)(rng));
        MomentumSymbol s = symbol_at(dm, k);
        Mat4 R = free_resolvent_symbol(dm, k, z);
        CHECK(((s.h - z * Mat4::Identity()) * R - Mat4::Identity()).norm() < 1e-13);
        // (Dm - z)^{-1}(Dm + z)^{-1} = (-Delta + m^2 - z^2)^{-1}; the second
        // factor is the resolvent at -z
        Mat4 Rp = free_resolvent_symbol(dm, k, -z);
        cplx scalar = 1.0 / (k.squaredNorm() + 1.0 - z * z);
        CHECK((R * Rp - scalar * Mat4::Identity()).norm() < 1e-12 * std::abs(scalar) * 10);
    }
    CHECK_THROWS_AS(free_resolvent_symbol(dm, k0, cplx(s0.lambda, 0)), std::domain_error);
}

TEST_CASE("spectral cutoff symbol: chi=1, indicator, identity function") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Vec3 k(0.4, -1.2, 0.9);
    MomentumSymbol s = symbol_at(dm, k);
    Mat4 one = spectral_cutoff_symbol(dm, k, [](double) { return 1.0; });
    CHECK((one - Mat4::Identity()).norm() < 1e-13);
    Mat4 ind = spectral_cutoff_symbol(dm, k, [&](double l) { return l >= dm.mass ? 1.0 : 0.0; });
    CHECK((ind - s.p_plus).norm() < 1e-13);
    Mat4 idf = spectral_cutoff_symbol(dm, k, [](double l) { return l; });
    CHECK((idf - s.h).norm() < 1e-12);
}

TEST_CASE("functional calculus consistency: chi1*chi2 symbol = product of symbols") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    std::mt19937_64 rng(23);
    auto c1 = [](double l) { return std::exp(-0.1 * l * l); };
    auto c2 = [](double l) { return 1.0 / (1.0 + l * l); };
    for (int t = 0; t < 50; ++t) {
        Vec3 k = random_k(rng);
        Mat4 a = spectral_cutoff_symbol(dm, k, [&](double l) { return c1(l) * c2(l); });
        Mat4 b = spectral_cutoff_symbol(dm, k, c1) * spectral_cutoff_symbol(dm, k, c2);
        CHECK((a - b).norm() < 1e-12);
    }
}

TEST_CASE("bulk random-k algebra sweep (acceptance-1 scale, trimmed)") {
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    std::mt19937_64 rng(29);
    double worst = 0.0;
    for (int t = 0; t < 2000; ++t) {
        Vec3 k = random_k(rng, 8.0);
        MomentumSymbol s = symbol_at(dm, k);
        double lam2 = k.squaredNorm() + 1.0;
        worst = std::max(worst, (s.h * s.h - lam2 * Mat4::Identity()).norm() / lam2);
    }
    CHECK(worst < 1e-12);
}
