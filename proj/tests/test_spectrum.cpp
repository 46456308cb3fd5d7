#include "doctest.h"

#include <random>

#include "nlde/dynamics.hpp"
#include "nlde/norms.hpp"
#include "nlde/spectrum.hpp"

using namespace nlde;

namespace {
Grid small_grid() { return Grid(8, 16.0); }

SpinorField smooth_probe(const Grid& g, unsigned seed, double width = 2.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0, 1);
    SpinorField f(g);
    for (long p = 0; p < g.npoints(); ++p) {
        double w = std::exp(-g.x_at(p).squaredNorm() / (2 * width * width));
        for (int c = 0; c < 4; ++c) f.at(p)[c] = w * cplx(gauss(rng), gauss(rng));
    }
    return f;
}
}  // namespace

TEST_CASE("bound states match the dense oracle on the same grid") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Potential V = build_potential(g, PotentialParams{});
    BoundStateSet b = bound_states(dm, V);
    CHECK(b.residual0 < 1e-9);
    CHECK(b.residual1 < 1e-9);
    CHECK(std::abs(inner(b.phi0, b.phi1)) < 1e-9);
    CHECK(b.nonresonant);

    Eigen::VectorXd ev = dense_spectrum_oracle(dm, V);
    std::vector<double> gap;
    for (long i = 0; i < ev.size(); ++i)
        if (ev(i) > -0.985 && ev(i) < 0.985) gap.push_back(ev(i));
    REQUIRE(gap.size() == 2);
    CHECK(b.lambda0 == doctest::Approx(gap[0]).epsilon(1e-9));
    CHECK(b.lambda1 == doctest::Approx(gap[1]).epsilon(1e-9));
}

TEST_CASE("V=0 rejects with the need-two-eigenvalues error") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Potential V0 = build_potential(g, {PotentialFamily::Zero});
    CHECK_THROWS_WITH_AS(bound_states(dm, V0),
                         doctest::Contains("need two eigenvalues"), std::runtime_error);
}

TEST_CASE("scalar_beta potential trips the Kramers obstruction") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    PotentialParams pp;
    pp.family = PotentialFamily::ScalarBeta;
    pp.a_depth = -0.45;
    pp.a_width = 2.5;
    Potential V = build_potential(g, pp);
    // dense oracle: the gap spectrum of a pure beta-well comes in two-fold
    // degenerate pairs
    Eigen::VectorXd ev = dense_spectrum_oracle(dm, V);
    std::vector<double> gap;
    for (long i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) < 0.985) gap.push_back(ev(i));
    REQUIRE(gap.size() >= 2);
    bool has_degenerate_pair = false;
    for (size_t i = 0; i + 1 < gap.size(); ++i)
        if (std::abs(gap[i + 1] - gap[i]) < 1e-8) has_degenerate_pair = true;
    CHECK(has_degenerate_pair);
    CHECK_THROWS_WITH_AS(bound_states(dm, V), doctest::Contains("Kramers"),
                         std::runtime_error);
}

TEST_CASE("distorted wave: V=0 rows equal free plane waves exactly") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Potential V0 = build_potential(g, {PotentialFamily::Zero});
    Vec3 k = Vec3(1, -2, 0) * g.dk;
    DistortedWave w = distorted_wave(dm, k, 1, V0, nullptr);
    MomentumSymbol s = symbol_at(dm, k);
    double worst = 0;
    for (long p = 0; p < g.npoints(); ++p) {
        cplx ph = std::exp(cplx(0, k.dot(g.x_at(p))));
        for (int c = 0; c < 4; ++c)
            worst = std::max(worst, std::abs(w.psi.at(p)[c] - ph * s.u_fw(c, 1)));
    }
    CHECK(worst < 1e-13);
    CHECK(norm2(w.w) < 1e-13);
    CHECK_THROWS_AS(distorted_wave(dm, Vec3(0.123, 0, 0), 0, V0, nullptr),
                    std::invalid_argument);
}

TEST_CASE("distorted wave satisfies the eigenvalue equation within tolerance") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Potential V = build_potential(g, PotentialParams{});
    BoundStateSet b = bound_states(dm, V);
    for (int j : {0, 3}) {
        Vec3 k = Vec3(1, 1, 0) * g.dk;
        DistortedWave w = distorted_wave(dm, k, j, V, &b);
        CHECK(w.pde_residual < 0.05);  // epsilon-floor-limited on this box
        CHECK(norm2(w.w) > 1e-4);      // the scattered part is genuinely nonzero
    }
}

TEST_CASE("V=0 wave table is the exact free transform: Parseval + intertwining") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Potential V0 = build_potential(g, {PotentialFamily::Zero});
    BoundStateSet dummy;
    WaveTableOptions wo;
    wo.threads = 2;
    DistortedWaveTable tab = build_wave_table(dm, V0, dummy, wo);
    SpinorField f = smooth_probe(g, 21);
    SpinorField ff = generalized_fourier(tab, f);
    CHECK(std::abs(norm2(ff) - norm2(f)) < 1e-10 * norm2(f));
    // forward transform equals u(k)* composed with the ordinary transform
    SpinorField fh = to_momentum(f);
    double worst = 0;
    for (long p = 0; p < g.npoints(); ++p) {
        MomentumSymbol s = symbol_at(dm, g.k_at(p));
        Eigen::Vector4cd v;
        const cplx* d = fh.at(p);
        v << d[0], d[1], d[2], d[3];
        Eigen::Vector4cd w = s.u_fw.adjoint() * v;
        for (int c = 0; c < 4; ++c)
            worst = std::max(worst, std::abs(ff.at(p)[c] - w[c]));
    }
    CHECK(worst < 1e-10);
    // adjoint inverts
    SpinorField back = generalized_fourier_adjoint(tab, ff);
    SpinorField diff = back;
    axpy(cplx(-1, 0), f, diff);
    CHECK(norm2(diff) < 1e-10 * norm2(f));
    // propagator through the table equals the exact free flow
    SpinorField a = propagator_via_waves(tab, 3.0, [](double) { return 1.0; }, f);
    SpinorField e = free_flow(dm, f, 3.0);
    axpy(cplx(-1, 0), e, a);
    CHECK(norm2(a) < 1e-10 * norm2(f));
}

TEST_CASE("chebyshev functional calculus matches the symbol route for V=0") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    SpinorField f = smooth_probe(g, 23);
    std::function<double(double)> chi = [](double l) { return std::exp(-0.3 * l * l); };
    SpinorField a = chebyshev_function_of_h(dm, f, nullptr, chi, 160,
                                            hamiltonian_bound(dm, g, nullptr));
    SpinorField e = free_cutoff_apply(dm, f, chi);
    axpy(cplx(-1, 0), e, a);
    CHECK(norm2(a) < 1e-9 * norm2(f));
}

TEST_CASE("projector onto the continuous subspace of H") {
    Grid g = small_grid();
    DiracMatrices dm = dirac_matrices(kStandardRepresentation);
    Potential V = build_potential(g, PotentialParams{});
    BoundStateSet b = bound_states(dm, V);
    SpinorField f = smooth_probe(g, 25);
    SpinorField p1 = project_continuous_h(b, f);
    SpinorField p2 = project_continuous_h(b, p1);
    SpinorField d = p2;
    axpy(cplx(-1, 0), p1, d);
    CHECK(norm2(d) < 1e-12 * norm2(f));
    CHECK(std::abs(inner(b.phi0, p1)) < 1e-12 * norm2(f));
    CHECK(std::abs(inner(b.phi1, p1)) < 1e-12 * norm2(f));
}
