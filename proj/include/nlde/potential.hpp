#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlde/grid.hpp"

namespace nlde {

enum class PotentialFamily { Zero, ScalarBeta, KramersBreaking, UserTable };

struct PotentialParams {
    PotentialFamily family = PotentialFamily::KramersBreaking;
    // a(x) beta term: depth * exp(-|x|^2 / width^2); depth < 0 binds states
    // descending from +m.
    double a_depth = -0.20;
    double a_width = 2.5;
    // b(x) Sigma3 term (time-reversal breaking, splits Kramers doublets).
    double b_depth = -0.05;
    double b_width = 2.5;
};

/// 4x4 hermitian matrix potential sampled on the grid, with a fitted
/// tail-decay exponent and a time-reversal-symmetry flag.
struct Potential {
    Grid grid;
    PotentialParams params;
    std::vector<Mat4> values;       // one per grid point; empty means V = 0
    double decay_exponent = 0.0;    // fitted rho; +inf for super-polynomial
    bool breaks_time_reversal = false;

    bool is_zero() const { return values.empty(); }
    Mat4 at(long p) const { return values.empty() ? Mat4::Zero() : values[p]; }
    /// pointwise operator sup norm, max over the grid
    double sup_norm() const;
};

Potential build_potential(const Grid& g, const PotentialParams& params);
Potential build_potential_from_table(const Grid& g, std::vector<Mat4> table);

/// Fitted tail exponent rho of ||V(x)|| ~ C <x>^{-rho} over the outer
/// radial shells; returns +inf when the tail underflows (super-polynomial).
double fit_tail_exponent(const Potential& v);

/// Scales V by g (coupling sweeps).
Potential scaled_potential(const Potential& v, double g);

}  // namespace nlde
