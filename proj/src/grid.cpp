#include "nlde/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace nlde {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInvTwoPiPow32 = 0.0634936359342409697857633;  // (2 pi)^{-3/2}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct FftEngine::Impl {
    int n;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    ~Impl() {
        std::lock_guard<std::mutex> lk(plan_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
};

FftEngine::FftEngine(int n) : impl_(std::make_unique<Impl>()) {
    impl_->n = n;
    long npts = static_cast<long>(n) * n * n;
    std::vector<cplx> a(4 * npts), b(4 * npts);
    int dims[3] = {n, n, n};
    std::lock_guard<std::mutex> lk(plan_mutex());
    // 4 interleaved components per point: stride 4, dist 1.
    impl_->fwd = fftw_plan_many_dft(
        3, dims, 4, reinterpret_cast<fftw_complex*>(a.data()), nullptr, 4, 1,
        reinterpret_cast<fftw_complex*>(b.data()), nullptr, 4, 1, FFTW_FORWARD,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    impl_->bwd = fftw_plan_many_dft(
        3, dims, 4, reinterpret_cast<fftw_complex*>(a.data()), nullptr, 4, 1,
        reinterpret_cast<fftw_complex*>(b.data()), nullptr, 4, 1, FFTW_BACKWARD,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("FFTW planning failed");
}

FftEngine::~FftEngine() = default;

void FftEngine::forward(const cplx* in, cplx* out) const {
    fftw_execute_dft(impl_->fwd,
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void FftEngine::backward(const cplx* in, cplx* out) const {
    fftw_execute_dft(impl_->bwd,
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

Grid::Grid(int n_, double L_) : n(n_), L(L_) {
    if (!is_pow2(n)) throw std::invalid_argument("grid n must be a power of two");
    if (!(L > 0.0)) throw std::invalid_argument("grid L must be positive");
    dx = L / n;
    dk = kTwoPi / L;
    fft = std::make_shared<FftEngine>(n);
}

Vec3 Grid::x_at(long p) const {
    int iz = static_cast<int>(p % n);
    int iy = static_cast<int>((p / n) % n);
    int ix = static_cast<int>(p / (static_cast<long>(n) * n));
    return Vec3(x_coord(ix), x_coord(iy), x_coord(iz));
}

Vec3 Grid::k_at(long p) const {
    int iz = static_cast<int>(p % n);
    int iy = static_cast<int>((p / n) % n);
    int ix = static_cast<int>(p / (static_cast<long>(n) * n));
    return Vec3(k_coord(ix), k_coord(iy), k_coord(iz));
}

namespace {

// x-grid starts at -L/2, so the continuum phase e^{±ik L/2} per axis is
// (-1)^{m} on the storage index m (n even).
void checkerboard(const Grid& g, std::vector<cplx>& v) {
    const int n = g.n;
    long p = 0;
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy)
            for (int iz = 0; iz < n; ++iz, ++p)
                if ((ix + iy + iz) & 1)
                    for (int c = 0; c < 4; ++c) v[4 * p + c] = -v[4 * p + c];
}

}  // namespace

SpinorField to_momentum(const SpinorField& f) {
    if (f.tag != SpaceTag::Position)
        throw std::logic_error("to_momentum: position-space field required");
    SpinorField out(f.grid, SpaceTag::Momentum);
    f.grid.fft->forward(f.data.data(), out.data.data());
    checkerboard(f.grid, out.data);
    double c = kInvTwoPiPow32 * f.grid.cell_volume();
    for (auto& z : out.data) z *= c;
    return out;
}

SpinorField to_position(const SpinorField& f) {
    if (f.tag != SpaceTag::Momentum)
        throw std::logic_error("to_position: field not in momentum space");
    SpinorField tmp = f;  // checkerboard must not mutate the input
    checkerboard(f.grid, tmp.data);
    SpinorField out(f.grid, SpaceTag::Position);
    f.grid.fft->backward(tmp.data.data(), out.data.data());
    double c = kInvTwoPiPow32 * f.grid.k_cell_volume();
    for (auto& z : out.data) z *= c;
    return out;
}

cplx inner(const SpinorField& a, const SpinorField& b) {
    if (!a.grid.same_as(b.grid) || a.tag != b.tag)
        throw std::invalid_argument("inner: grid/tag mismatch");
    cplx s(0.0, 0.0);
    for (size_t i = 0; i < a.data.size(); ++i) s += std::conj(a.data[i]) * b.data[i];
    return s * a.volume_weight();
}

double norm2(const SpinorField& a) {
    double s = 0.0;
    for (const auto& z : a.data) s += std::norm(z);
    return std::sqrt(s * a.volume_weight());
}

void axpy(cplx alpha, const SpinorField& x, SpinorField& y) {
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

SpinorField scaled(const SpinorField& x, cplx alpha) {
    SpinorField y = x;
    for (auto& z : y.data) z *= alpha;
    return y;
}

double inner(const RealSpinorField& a, const RealSpinorField& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s * a.grid.cell_volume();
}

double norm2(const RealSpinorField& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s * a.grid.cell_volume());
}

void axpy(double alpha, const RealSpinorField& x, RealSpinorField& y) {
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

void apply_matrix_field(SpinorField& f, const std::function<Mat4(const Vec3&)>& m) {
    const long npts = f.grid.npoints();
    Eigen::Vector4cd v;
    for (long p = 0; p < npts; ++p) {
        Vec3 q = (f.tag == SpaceTag::Position) ? f.grid.x_at(p) : f.grid.k_at(p);
        Mat4 mp = m(q);
        cplx* d = f.at(p);
        v << d[0], d[1], d[2], d[3];
        Eigen::Vector4cd w = mp * v;
        d[0] = w[0]; d[1] = w[1]; d[2] = w[2]; d[3] = w[3];
    }
}

void apply_scalar_multiplier(SpinorField& fhat, const std::function<cplx(const Vec3&)>& m) {
    if (fhat.tag != SpaceTag::Momentum)
        throw std::logic_error("apply_scalar_multiplier: momentum-space field required");
    const long npts = fhat.grid.npoints();
    for (long p = 0; p < npts; ++p) {
        cplx w = m(fhat.grid.k_at(p));
        cplx* d = fhat.at(p);
        for (int c = 0; c < 4; ++c) d[c] *= w;
    }
}

SpinorField complexify(const RealSpinorField& f) {
    SpinorField out(f.grid, SpaceTag::Position);
    const long npts = f.grid.npoints();
    for (long p = 0; p < npts; ++p) {
        const double* r = f.at(p);
        cplx* d = out.at(p);
        for (int c = 0; c < 4; ++c) d[c] = cplx(r[c], r[4 + c]);
    }
    return out;
}

RealSpinorField realify(const SpinorField& f) {
    if (f.tag != SpaceTag::Position)
        throw std::logic_error("realify: position-space field required");
    RealSpinorField out(f.grid);
    const long npts = f.grid.npoints();
    for (long p = 0; p < npts; ++p) {
        const cplx* d = f.at(p);
        double* r = out.at(p);
        for (int c = 0; c < 4; ++c) {
            r[c] = d[c].real();
            r[4 + c] = d[c].imag();
        }
    }
    return out;
}

}  // namespace nlde
