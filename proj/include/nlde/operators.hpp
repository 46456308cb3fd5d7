#pragma once

#include "nlde/dirac.hpp"
#include "nlde/grid.hpp"
#include "nlde/potential.hpp"

namespace nlde {

/// D_m f via symbol multiplication in momentum space (position in/out).
SpinorField apply_dirac(const DiracMatrices& dm, const SpinorField& f);

/// H f = (D_m + V) f.
SpinorField apply_hamiltonian(const DiracMatrices& dm, const SpinorField& f,
                              const Potential* V);

/// e^{-it D_m} f, exact on the grid.
SpinorField free_flow(const DiracMatrices& dm, const SpinorField& f, double t);

/// R_0(z) f = (D_m - z)^{-1} f via the symbol. Throws when z collides with
/// a grid symbol eigenvalue ±lambda(k).
SpinorField free_resolvent_apply(const DiracMatrices& dm, const SpinorField& f, cplx z);

/// chi(D_m) f through the band decomposition of the symbol.
SpinorField free_cutoff_apply(const DiracMatrices& dm, const SpinorField& f,
                              const std::function<double(double)>& chi);

/// chi(H) f by Chebyshev expansion on the grid spectral interval
/// [-bound, bound]; degree grows until the tail of the expansion falls
/// below tol. Works for any bounded chi sampled on the interval.
SpinorField chebyshev_function_of_h(const DiracMatrices& dm, const SpinorField& f,
                                    const Potential* V,
                                    const std::function<double(double)>& chi,
                                    int degree, double bound);

/// Spectral-interval bound ||H|| <= lambda_max(grid) + sup|V|.
double hamiltonian_bound(const DiracMatrices& dm, const Grid& g, const Potential* V);

}  // namespace nlde
