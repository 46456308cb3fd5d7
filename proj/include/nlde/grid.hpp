#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "nlde/dirac.hpp"

namespace nlde {

class FftEngine;

/// Periodic box [-L/2, L/2)^3 sampled with n points per axis (n a power of
/// two). Position samples x_i = -L/2 + i dx; frequencies in FFT storage
/// order, dk * {0, 1, ..., n/2-1, -n/2, ..., -1}. Both grids contain 0.
struct Grid {
    int n = 0;
    double L = 0.0;
    double dx = 0.0;
    double dk = 0.0;
    std::shared_ptr<FftEngine> fft;

    Grid() = default;
    Grid(int n_, double L_);

    long npoints() const { return static_cast<long>(n) * n * n; }
    double cell_volume() const { return dx * dx * dx; }
    double k_cell_volume() const { return dk * dk * dk; }
    /// Per-axis Nyquist |k|_max = pi n / L.
    double k_nyquist() const { return dk * (n / 2); }
    /// Largest |k| on the grid (box corner).
    double k_corner() const { return k_nyquist() * std::sqrt(3.0); }

    double x_coord(int i) const { return -L / 2 + dx * i; }
    double k_coord(int i) const { return dk * (i < n / 2 ? i : i - n); }

    Vec3 x_at(long p) const;
    Vec3 k_at(long p) const;
    long index(int ix, int iy, int iz) const {
        return (static_cast<long>(ix) * n + iy) * n + iz;
    }
    bool same_as(const Grid& o) const { return n == o.n && L == o.L; }
};

enum class SpaceTag { Position, Momentum };

/// C^4-valued field on the grid; 4 components stored contiguously per point.
struct SpinorField {
    Grid grid;
    SpaceTag tag = SpaceTag::Position;
    std::vector<cplx> data;  // size 4 n^3

    SpinorField() = default;
    explicit SpinorField(const Grid& g, SpaceTag t = SpaceTag::Position)
        : grid(g), tag(t), data(4 * g.npoints(), cplx(0.0, 0.0)) {}

    cplx* at(long p) { return data.data() + 4 * p; }
    const cplx* at(long p) const { return data.data() + 4 * p; }
    double volume_weight() const {
        return tag == SpaceTag::Position ? grid.cell_volume() : grid.k_cell_volume();
    }
};

/// R^8-valued field (realified C^4): components 0..3 = Re, 4..7 = Im.
struct RealSpinorField {
    Grid grid;
    std::vector<double> data;  // size 8 n^3

    RealSpinorField() = default;
    explicit RealSpinorField(const Grid& g) : grid(g), data(8 * g.npoints(), 0.0) {}

    double* at(long p) { return data.data() + 8 * p; }
    const double* at(long p) const { return data.data() + 8 * p; }
};

// ---- transforms (Parseval-normalized: ||f||_2 is preserved) ----
SpinorField to_momentum(const SpinorField& f);
SpinorField to_position(const SpinorField& f);

// ---- basic vector algebra ----
cplx inner(const SpinorField& a, const SpinorField& b);  // conjugate-linear in a
double norm2(const SpinorField& a);
void axpy(cplx alpha, const SpinorField& x, SpinorField& y);
SpinorField scaled(const SpinorField& x, cplx alpha);

double inner(const RealSpinorField& a, const RealSpinorField& b);
double norm2(const RealSpinorField& a);
void axpy(double alpha, const RealSpinorField& x, RealSpinorField& y);

// ---- pointwise helpers ----
/// Multiply each point value by a 4x4 matrix-valued function of the grid
/// coordinate (position or momentum per the field's tag).
void apply_matrix_field(SpinorField& f, const std::function<Mat4(const Vec3&)>& m);
/// Multiply each momentum-space point by a scalar function of k.
void apply_scalar_multiplier(SpinorField& fhat, const std::function<cplx(const Vec3&)>& m);

SpinorField complexify(const RealSpinorField& f);
RealSpinorField realify(const SpinorField& f);

/// FFTW-backed batched 3D transforms for 4 interleaved components.
class FftEngine {
  public:
    FftEngine(int n);
    ~FftEngine();
    FftEngine(const FftEngine&) = delete;
    FftEngine& operator=(const FftEngine&) = delete;

    void forward(const cplx* in, cplx* out) const;   // unnormalized DFT, e^{-i}
    void backward(const cplx* in, cplx* out) const;  // unnormalized DFT, e^{+i}

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace nlde
