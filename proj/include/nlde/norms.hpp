#pragma once

#include "nlde/grid.hpp"

namespace nlde {

/// Smooth dyadic partition of unity on |xi|. chi is 1 on [0,1] and 0 on
/// [2,inf) with a C-infinity exponential transition; the annulus bump is
/// phihat(r) = chi(r) - chi(2r), supported in [1/2, 2], and
/// phihat0(r) + sum_{j>=1} phihat(2^{-j} r) = 1 with phihat0 = chi.
/// These constants fix every Besov norm and every dyadic kernel cutoff.
namespace dyadic_bump {
double transition(double s);        // 0 at s<=0, 1 at s>=1, C-infinity
double chi(double r);               // low-pass
double phihat(double r);            // annulus bump chi(r) - chi(2r)
double phihat_j(int j, double r);   // j=0 -> chi(r), j>=1 -> phihat(2^{-j} r)
}  // namespace dyadic_bump

/// || <Q>^sigma <P>^t f ||_2 : <P>^t multiplier in momentum space, then
/// <x>^sigma weight in position space. f must be position-space.
double weighted_sobolev_norm(const SpinorField& f, double sigma, double t);

/// <P>^t f (position-space in, position-space out).
SpinorField bessel_potential(const SpinorField& f, double t);

/// Maximal dyadic index representable on the grid (block support
/// [2^{j-1}, 2^{j+1}] vs corner |k|).
int besov_jmax(const Grid& g);

struct BesovResult {
    double value = 0.0;
    bool truncated = false;  // requested blocks beyond the Nyquist ball
    int jmax_used = 0;
};

/// Inhomogeneous Besov norm (sum_j 2^{jsq} ||phi_j * f||_p^q)^{1/q} with the
/// dyadic_bump partition; p, q in [1, inf] (pass infinity for sup norms).
BesovResult besov_norm(const SpinorField& f, double s, double p, double q);

/// The j-th Littlewood-Paley block phi_j * f (position-space in/out).
SpinorField besov_block(const SpinorField& f, int j);

/// L^p norm on the grid, p in [1, inf].
double lp_norm(const SpinorField& f, double p);

}  // namespace nlde
