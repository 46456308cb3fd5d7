#include "doctest.h"

#include <cmath>

#include "nlde/norms.hpp"
#include "nlde/oscillatory.hpp"

using namespace nlde;

namespace {

// the fixed test family: pole direction z
SphereIntegrand generic_one() {
    SphereIntegrand s;
    s.f = [](const Vec3&) { return cplx(1.0, 0.0); };
    s.smoothness_class = SphereClass::C1Generic;
    return s;
}

SphereIntegrand vanishing_sin() {
    SphereIntegrand s;
    // |omega x v| = sin(phi): bounded angular derivatives, vanishes at ±v
    s.f = [](const Vec3& w) { return cplx(std::sqrt(std::max(0.0, 1.0 - w.z() * w.z())), 0.0); };
    s.smoothness_class = SphereClass::C2VanishingAtPoles;
    return s;
}

SphereIntegrand away_spline() {
    SphereIntegrand s;
    // quadratic spline in phi around the equator: C^1 with Lipschitz
    // derivative, support distance pi/2 - 0.9 from the poles
    s.f = [](const Vec3& w) {
        double phi = std::acos(std::clamp(w.z(), -1.0, 1.0));
        double x = (phi - M_PI / 2) / 0.9;
        double a = std::max(0.0, 1.0 - std::abs(x));
        return cplx(a * a, 0.0);
    };
    s.smoothness_class = SphereClass::C2SupportedAway;
    return s;
}

cplx closed_form_J1(double k) {
    // f == 1: 4 pi e^{ik} sin(k)/k
    if (k == 0.0) return cplx(4 * M_PI, 0);
    return 4.0 * M_PI * std::exp(cplx(0, k)) * std::sin(k) / k;
}

}  // namespace

TEST_CASE("J_v closed form for f == 1") {
    SphereIntegrand s = generic_one();
    for (double k : {0.5, 2.0, 7.3, 25.0, 80.0}) {
        QuadratureResult r = sphere_integral_J(s, k);
        cplx expect = closed_form_J1(k);
        CHECK(std::abs(r.value - expect) < 1e-8 * std::abs(expect) + 1e-12);
        CHECK(r.error < 1e-8 * (std::abs(expect) + 1.0));
    }
}

TEST_CASE("J_v(0) equals the plain sphere integral") {
    SphereIntegrand s = vanishing_sin();
    // int_{S^2} sin(phi) domega = 2 pi int_0^pi sin^2 = pi^2
    QuadratureResult r = sphere_integral_J(s, 0.0, 4.0);
    CHECK(std::abs(r.value - cplx(M_PI * M_PI, 0)) < std::max(4 * r.error, 1e-7));
}

TEST_CASE("rotation invariance of (f, v) pairs") {
    SphereIntegrand s = vanishing_sin();
    QuadratureResult base = sphere_integral_J(s, 11.0);

    // rotate both v and f by a fixed rotation R
    Eigen::Matrix3d R(Eigen::AngleAxisd(0.7, Vec3(1, 2, 0.5).normalized()));
    SphereIntegrand rot;
    rot.v = R * Vec3(0, 0, 1);
    rot.f = [&R, &s](const Vec3& w) { return s.f(R.transpose() * w); };
    QuadratureResult r = sphere_integral_J(rot, 11.0);
    CHECK(std::abs(r.value - base.value) < 1e-10 * (1 + std::abs(base.value)));
}

TEST_CASE("conjugate symmetry J_v(-k) = conj(J_v(k)) for real f") {
    SphereIntegrand s = away_spline();
    for (double k : {3.0, 17.0}) {
        cplx a = sphere_integral_J(s, k).value;
        cplx b = sphere_integral_J(s, -k).value;
        CHECK(std::abs(b - std::conj(a)) < 1e-10);
    }
}

TEST_CASE("class verification by sampling") {
    CHECK_NOTHROW(vanishing_sin().verify_class());
    CHECK_NOTHROW(away_spline().verify_class());
    SphereIntegrand bad = generic_one();
    bad.smoothness_class = SphereClass::C2VanishingAtPoles;
    CHECK_THROWS_AS(bad.verify_class(), std::invalid_argument);
    SphereIntegrand touching = vanishing_sin();
    touching.smoothness_class = SphereClass::C2SupportedAway;
    CHECK_THROWS_AS(touching.verify_class(), std::invalid_argument);
    CHECK(away_spline().support_distance() > 0.5);
}

TEST_CASE("a posteriori error: doubling changes the value by < the estimate") {
    SphereIntegrand s = vanishing_sin();
    for (double k : {9.0, 33.0}) {
        QuadratureResult r1 = sphere_integral_J(s, k, 1.0);
        QuadratureResult r2 = sphere_integral_J(s, k, 2.0);
        CHECK(std::abs(r2.value - r1.value) <= std::max(r1.error, 1e-12));
    }
}

TEST_CASE("the three decay classes fit their exponents (±0.15)") {
    std::vector<double> ks;
    for (double k = 2.0; k <= 110.0; k *= 1.12) ks.push_back(k);
    struct Case { SphereIntegrand s; double expo; };
    std::vector<Case> cases = {{generic_one(), -1.0},
                               {vanishing_sin(), -1.5},
                               {away_spline(), -2.0}};
    std::vector<std::vector<double>> mags;
    for (auto& c : cases) {
        c.s.verify_class();
        std::vector<double> mag;
        for (double k : ks) mag.push_back(std::abs(sphere_integral_J(c.s, k).value));
        BoundClassFit f = bound_class_fit(ks, mag, c.expo);
        CHECK(f.pass);
        CHECK(f.slope == doctest::Approx(c.expo).epsilon(0.15 / std::abs(c.expo)));
        mags.push_back(mag);
    }
    // strict ordering at large k (window envelopes; pointwise samples can
    // sit on zeros of sin k)
    auto env_tail = [&](const std::vector<double>& m) {
        double e = 0;
        for (size_t i = ks.size() - 6; i < ks.size(); ++i) e = std::max(e, m[i]);
        return e;
    };
    CHECK(env_tail(mags[2]) < env_tail(mags[1]));
    CHECK(env_tail(mags[1]) < env_tail(mags[0]));
}

TEST_CASE("bound_class_fit rejects short abscissa spans") {
    std::vector<double> ks = {1, 2, 4, 8}, mag = {1, 0.5, 0.25, 0.125};
    CHECK_THROWS_AS(bound_class_fit(ks, mag, -1.0), std::invalid_argument);
}

TEST_CASE("cone integral: k=0 gives the plain integral of g") {
    ConeIntegrand c;
    c.radial = true;
    c.band_lo = 0.0;
    c.band_hi = 7.0;
    c.h = [](double rho) { return std::sqrt(rho * rho + 1.0); };
    c.g_radial = [](double rho) { return cplx(std::exp(-rho * rho), 0.0); };
    QuadratureResult r = cone_integral_I(c, 0.0, Vec3(0, 0, 0));
    // 4 pi int rho^2 e^{-rho^2} = pi^{3/2}
    CHECK(std::abs(r.value - cplx(std::pow(M_PI, 1.5), 0)) < 1e-8);
}

TEST_CASE("cone integral: radial g with u=0 matches 1D quadrature oracle") {
    ConeIntegrand c;
    c.radial = true;
    c.band_lo = 0.0;
    c.band_hi = 3.0;
    double m = 1.0, k = 6.0;
    c.h = [m](double rho) { return std::sqrt(rho * rho + m * m); };
    c.g_radial = [](double rho) { return cplx(std::exp(-rho * rho), 0.0); };
    QuadratureResult r = cone_integral_I(c, k, Vec3(0, 0, 0));
    // oracle: 4 pi int_0^3 e^{ik sqrt(rho^2+m^2)} e^{-rho^2} rho^2 drho by
    // fine midpoint quadrature
    const int N = 400000;
    cplx acc(0, 0);
    for (int i = 0; i < N; ++i) {
        double rho = (i + 0.5) * 3.0 / N;
        acc += std::exp(cplx(0, k * std::sqrt(rho * rho + m * m))) *
               std::exp(-rho * rho) * rho * rho * (3.0 / N);
    }
    acc *= 4.0 * M_PI;
    CHECK(std::abs(r.value - acc) < 1e-7);
}

TEST_CASE("cone integral: generic (non-radial) path agrees with radial fast path") {
    double m = 1.0, k = 4.0;
    Vec3 u(0.2, -0.1, 0.4);
    ConeIntegrand cr;
    cr.radial = true;
    cr.band_lo = 0.0;
    cr.band_hi = 2.5;
    cr.h = [m](double rho) { return std::sqrt(rho * rho + m * m); };
    cr.g_radial = [](double rho) { return cplx(std::exp(-rho * rho), 0.0); };
    ConeIntegrand cg = cr;
    cg.radial = false;
    cg.g = [](const Vec3& xi) { return cplx(std::exp(-xi.squaredNorm()), 0.0); };
    QuadratureResult a = cone_integral_I(cr, k, u);
    QuadratureResult b = cone_integral_I(cg, k, u);
    CHECK(std::abs(a.value - b.value) < 1e-6 * (1 + std::abs(a.value)));
}

TEST_CASE("sublevel-set bound for the radial phase derivative") {
    // f = d/drho h / inf |d^2/drho^2 h| on the band, h = sqrt(rho^2+m^2) - c rho
    double m = 1.0;
    for (double c : {0.0, 0.3, 0.6}) {
        double lo = 0.5, hi = 4.0;
        auto lam = [m](double r) { return std::sqrt(r * r + m * m); };
        auto hp = [&](double r) { return r / lam(r) - c; };
        double inf_hpp = 1e300;
        for (int i = 0; i <= 1000; ++i) {
            double r = lo + (hi - lo) * i / 1000.0;
            inf_hpp = std::min(inf_hpp, m * m / std::pow(lam(r), 3));
        }
        auto f = [&](double r) { return hp(r) / inf_hpp; };
        for (double alpha : {0.05, 0.2, 1.0}) {
            double meas = sublevel_measure(f, lo, hi, alpha);
            if (f(lo) >= 0.0)
                CHECK(meas <= alpha + 1e-3);  // monotone from nonneg start
            CHECK(meas <= 2 * alpha + 1e-3);
        }
    }
}

TEST_CASE("free kernel at t=0, x=0: annulus-weighted volume by static quadrature") {
    int j = 3;
    double m = 1.0;
    QuadratureResult r = free_kernel_K(j, 0.0, 0.0, m);
    // static oracle: 4 pi int rho^2 phihat(2^{-j} lambda(rho)) drho, fine midpoint
    const int N = 200000;
    double lo = 0.0, hi = 20.0;
    double acc = 0;
    for (int i = 0; i < N; ++i) {
        double rho = lo + (i + 0.5) * (hi - lo) / N;
        double lam = std::sqrt(rho * rho + m * m);
        acc += rho * rho * dyadic_bump::phihat_j(j, lam) * ((hi - lo) / N);
    }
    acc *= 4 * M_PI;
    CHECK(r.value.real() == doctest::Approx(acc).epsilon(1e-6));
    CHECK(std::abs(r.value.imag()) < 1e-9 * acc);
    CHECK(r.value.real() > 0);
}

TEST_CASE("free kernel t=0 sup scales like 2^{3j} across blocks") {
    double m = 1.0;
    double k2 = free_kernel_K(2, 0, 0, m).value.real();
    double k3 = free_kernel_K(3, 0, 0, m).value.real();
    double k4 = free_kernel_K(4, 0, 0, m).value.real();
    CHECK(k3 / k2 == doctest::Approx(8.0).epsilon(0.2));
    CHECK(k4 / k3 == doctest::Approx(8.0).epsilon(0.2));
}

TEST_CASE("free kernel decay: sup_x |K_j(x,t)| fits t^{-3/2} on [1,50]" *
          doctest::skip(false)) {
    int j = 1;
    double m = 1.0;
    std::vector<double> ts, sups;
    for (double t = 1.0; t <= 50.0; t *= 1.25) {
        ts.push_back(t);
        sups.push_back(free_kernel_sup(j, t, m));
    }
    DecaySeries s;
    s.t = ts;
    s.value = sups;
    fit_decay(s, 1.0, 50.0);
    CHECK(s.exponent == doctest::Approx(-1.5).epsilon(0.1));
    // paper bound with a fitted constant: |K_j| <= C 2^{3j} / t^{3/2}
    double cfit = 0;
    for (size_t i = 0; i < ts.size(); ++i)
        cfit = std::max(cfit, sups[i] * std::pow(ts[i], 1.5) / std::ldexp(1.0, 3 * j));
    CHECK(cfit < 50.0);
}
