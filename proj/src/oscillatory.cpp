#include "nlde/oscillatory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nlde/norms.hpp"

namespace nlde {

namespace {

constexpr int kMaxNodes = 1 << 17;

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

void orthonormal_triad(const Vec3& v, Vec3& e1, Vec3& e2) {
    Vec3 a = (std::abs(v.x()) < 0.9) ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    e1 = v.cross(a).normalized();
    e2 = v.cross(e1);
}

cplx sphere_quad(const SphereIntegrand& s, double k, int nc, int ntheta) {
    std::vector<double> xc, wc;
    gauss_legendre(nc, xc, wc);
    Vec3 e1, e2;
    Vec3 v = s.v.normalized();
    orthonormal_triad(v, e1, e2);
    const cplx I(0, 1);
    cplx acc(0, 0);
    for (int ic = 0; ic < nc; ++ic) {
        double c = xc[ic];
        double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
        cplx phase = std::exp(I * k * (1.0 - c));
        cplx ring(0, 0);
        for (int it = 0; it < ntheta; ++it) {
            double th = 2.0 * M_PI * it / ntheta;
            Vec3 omega = sn * (std::cos(th) * e1 + std::sin(th) * e2) + c * v;
            ring += s.f(omega);
        }
        acc += wc[ic] * phase * ring * (2.0 * M_PI / ntheta);
    }
    return acc;
}

cplx sinc(double x) {
    if (std::abs(x) < 1e-8) return cplx(1.0 - x * x / 6.0, 0.0);
    return cplx(std::sin(x) / x, 0.0);
}

/// 4 pi int rho^2 e^{i a h(rho)} sinc(b rho) g(rho) drho over [lo, hi].
cplx radial_cone(const std::function<cplx(double)>& g,
                 const std::function<double(double)>& h, double a, double b,
                 double lo, double hi, int nodes) {
    std::vector<double> xg, wg;
    gauss_legendre(nodes, xg, wg);
    const cplx I(0, 1);
    cplx acc(0, 0);
    double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int i = 0; i < nodes; ++i) {
        double rho = mid + half * xg[i];
        acc += wg[i] * half * rho * rho * std::exp(I * a * h(rho)) * sinc(b * rho) * g(rho);
    }
    return 4.0 * M_PI * acc;
}

int radial_node_count(double a, double hprime_bound, double b, double lo, double hi,
                      double mult) {
    double phase_span = (std::abs(a) * hprime_bound + std::abs(b)) * (hi - lo);
    int n = static_cast<int>(std::ceil(mult * std::max(64.0, 10.0 * phase_span / (2.0 * M_PI))));
    if (n > kMaxNodes)
        throw std::runtime_error("cone quadrature: resolution cap exceeded");
    return n;
}

}  // namespace

double SphereIntegrand::support_distance() const {
    Vec3 v_n = v.normalized();
    Vec3 e1, e2;
    orthonormal_triad(v_n, e1, e2);
    double closest = M_PI;
    const int nphi = 720, ntheta = 90;
    for (int ip = 0; ip <= nphi; ++ip) {
        double phi = M_PI * ip / nphi;
        for (int it = 0; it < ntheta; ++it) {
            double th = 2.0 * M_PI * it / ntheta;
            Vec3 omega = std::sin(phi) * (std::cos(th) * e1 + std::sin(th) * e2) +
                         std::cos(phi) * v_n;
            if (std::abs(f(omega)) > 1e-12) {
                double d = std::min(phi, M_PI - phi);
                closest = std::min(closest, d);
            }
        }
    }
    return closest;
}

void SphereIntegrand::verify_class() const {
    Vec3 v_n = v.normalized();
    if (smoothness_class == SphereClass::C2VanishingAtPoles) {
        if (std::abs(f(v_n)) > 1e-10 || std::abs(f(-v_n)) > 1e-10)
            throw std::invalid_argument("sphere integrand does not vanish at ±v");
    } else if (smoothness_class == SphereClass::C2SupportedAway) {
        // the sampling lattice has spacing pi/720; anything below two
        // lattice steps counts as touching
        if (!(support_distance() > 2.0 * M_PI / 720))
            throw std::invalid_argument("sphere integrand support touches ±v");
    }
}

QuadratureResult sphere_integral_J(const SphereIntegrand& s, double k,
                                   double resolution_multiplier) {
    int nc = static_cast<int>(std::ceil(
        resolution_multiplier * std::max(64.0, 8.0 * std::ceil(std::abs(k)))));
    if (nc > kMaxNodes) throw std::runtime_error("sphere quadrature: resolution cap exceeded");
    int ntheta = std::max(64, nc / 8);
    cplx coarse = sphere_quad(s, k, nc, ntheta);
    cplx fine = sphere_quad(s, k, 2 * nc, 2 * ntheta);
    QuadratureResult r;
    r.value = fine;
    r.error = std::abs(fine - coarse);
    return r;
}

QuadratureResult cone_integral_I(const ConeIntegrand& c, double k, const Vec3& u,
                                 double resolution_multiplier) {
    QuadratureResult r;
    double unorm = u.norm();
    if (c.radial) {
        double b = k * unorm;
        int n = radial_node_count(k, c.hprime_bound, b, c.band_lo, c.band_hi,
                                  resolution_multiplier);
        cplx coarse = radial_cone(c.g_radial, c.h, k, b, c.band_lo, c.band_hi, n);
        cplx fine = radial_cone(c.g_radial, c.h, k, b, c.band_lo, c.band_hi, 2 * n);
        r.value = fine;
        r.error = std::abs(fine - coarse);
        return r;
    }
    // generic path: radial Gauss-Legendre x sphere quadrature of g(rho omega)
    auto eval = [&](double mult) {
        int nr = radial_node_count(k, c.hprime_bound, k * unorm, c.band_lo, c.band_hi, mult);
        nr = std::min(nr, 4096);
        std::vector<double> xg, wg;
        gauss_legendre(nr, xg, wg);
        const cplx I(0, 1);
        cplx acc(0, 0);
        double mid = 0.5 * (c.band_lo + c.band_hi), half = 0.5 * (c.band_hi - c.band_lo);
        Vec3 dir = unorm > 0 ? Vec3(u / unorm) : Vec3(0, 0, 1);
        for (int i = 0; i < nr; ++i) {
            double rho = mid + half * xg[i];
            SphereIntegrand ring;
            ring.v = dir;
            ring.f = [&](const Vec3& omega) { return c.g(rho * omega); };
            int nc = std::max(64, static_cast<int>(8 * std::ceil(std::abs(k) * rho * unorm)));
            nc = std::min(nc, 2048);
            // e^{-ik rho u.omega} = e^{-ik rho |u|} e^{ik rho |u| (1 - dir.omega)}
            cplx inner = sphere_quad(ring, k * rho * unorm, nc, 64) *
                         std::exp(cplx(0, -k * rho * unorm));
            acc += wg[i] * half * rho * rho * std::exp(I * k * c.h(rho)) * inner;
        }
        return acc;
    };
    cplx coarse = eval(resolution_multiplier);
    cplx fine = eval(2 * resolution_multiplier);
    r.value = fine;
    r.error = std::abs(fine - coarse);
    return r;
}

namespace {
void kernel_band(int j, double mass, double& rho_lo, double& rho_hi) {
    double lam_lo = (j == 0) ? mass : std::ldexp(1.0, j - 1);
    double lam_hi = std::ldexp(2.0, j);
    lam_lo = std::max(lam_lo, mass);
    rho_lo = std::sqrt(std::max(0.0, lam_lo * lam_lo - mass * mass));
    rho_hi = std::sqrt(std::max(0.0, lam_hi * lam_hi - mass * mass));
}
}  // namespace

QuadratureResult free_kernel_K(int j, double abs_x, double t, double mass,
                               double resolution_multiplier) {
    double rho_lo, rho_hi;
    kernel_band(j, mass, rho_lo, rho_hi);
    if (rho_hi <= rho_lo) return {};
    auto lambda = [mass](double rho) { return std::sqrt(rho * rho + mass * mass); };
    auto g = [j, lambda](double rho) {
        return cplx(dyadic_bump::phihat_j(j, lambda(rho)), 0.0);
    };
    int n = radial_node_count(-t, 1.0, abs_x, rho_lo, rho_hi, resolution_multiplier);
    QuadratureResult r;
    cplx coarse = radial_cone(g, lambda, -t, abs_x, rho_lo, rho_hi, n);
    cplx fine = radial_cone(g, lambda, -t, abs_x, rho_lo, rho_hi, 2 * n);
    r.value = fine;
    r.error = std::abs(fine - coarse);
    return r;
}

double free_kernel_sup(int j, double t, double mass, double x_max, int coarse) {
    double rho_lo, rho_hi;
    kernel_band(j, mass, rho_lo, rho_hi);
    if (x_max <= 0.0) {
        // default: just past the light cone of the band's fastest group speed
        double vmax = rho_hi / std::sqrt(rho_hi * rho_hi + mass * mass);
        x_max = std::max(1.0, 1.05 * vmax * std::abs(t));
    }
    // lattice fine enough for the kernel's spatial oscillation ~ pi/rho_max
    double spacing = std::min(x_max / coarse, M_PI / (3.0 * rho_hi));
    int nx = static_cast<int>(std::ceil(x_max / spacing));
    double best = 0.0, best_x = 0.0;
    for (int i = 0; i <= nx; ++i) {
        double x = x_max * i / nx;
        double a = std::abs(free_kernel_K(j, x, t, mass).value);
        if (a > best) {
            best = a;
            best_x = x;
        }
    }
    double lo = std::max(0.0, best_x - x_max / nx);
    double hi = std::min(x_max, best_x + x_max / nx);
    for (int i = 0; i <= 16; ++i) {
        double x = lo + (hi - lo) * i / 16.0;
        best = std::max(best, std::abs(free_kernel_K(j, x, t, mass).value));
    }
    return best;
}

double class_exponent(SphereClass c) {
    switch (c) {
        case SphereClass::C1Generic: return -1.0;
        case SphereClass::C2VanishingAtPoles: return -1.5;
        default: return -2.0;
    }
}

BoundClassFit bound_class_fit(const std::vector<double>& abscissa,
                              const std::vector<double>& magnitude,
                              double exponent) {
    if (abscissa.size() != magnitude.size() || abscissa.size() < 4)
        throw std::invalid_argument("bound_class_fit: need matched samples");
    double lo = *std::min_element(abscissa.begin(), abscissa.end());
    double hi = *std::max_element(abscissa.begin(), abscissa.end());
    if (std::log10(hi / lo) < 1.5 - 1e-9)
        throw std::invalid_argument("bound_class_fit: need >= 1.5 decades of abscissa");
    std::vector<double> kbrack;
    kbrack.reserve(abscissa.size());
    for (double k : abscissa) kbrack.push_back(std::sqrt(1.0 + k * k));
    BoundClassFit out;
    out.fit = fit_envelope_loglog(kbrack, magnitude, std::sqrt(1 + lo * lo),
                                  std::sqrt(1 + hi * hi) * 1.0000001, 12);
    out.slope = out.fit.slope;
    out.class_exponent = exponent;
    out.pass = out.slope <= exponent + 0.15;
    return out;
}

double sublevel_measure(const std::function<double(double)>& f, double lo, double hi,
                        double alpha, int samples) {
    double h = (hi - lo) / samples;
    long count = 0;
    for (int i = 0; i < samples; ++i) {
        double rho = lo + (i + 0.5) * h;
        if (std::abs(f(rho)) <= alpha) ++count;
    }
    return count * h;
}

}  // namespace nlde
