#include "nlde/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace nlde {

SpinorField apply_dirac(const DiracMatrices& dm, const SpinorField& f) {
    SpinorField fh = to_momentum(f);
    apply_matrix_field(fh, [&dm](const Vec3& k) { return symbol_at(dm, k).h; });
    return to_position(fh);
}

SpinorField apply_hamiltonian(const DiracMatrices& dm, const SpinorField& f,
                              const Potential* V) {
    if (f.tag != SpaceTag::Position)
        throw std::logic_error("apply_hamiltonian: position-space field required");
    SpinorField out = apply_dirac(dm, f);
    if (V && !V->is_zero()) {
        if (!V->grid.same_as(f.grid))
            throw std::invalid_argument("apply_hamiltonian: potential grid mismatch");
        const long npts = f.grid.npoints();
        Eigen::Vector4cd v;
        for (long p = 0; p < npts; ++p) {
            const cplx* d = f.at(p);
            v << d[0], d[1], d[2], d[3];
            Eigen::Vector4cd w = V->values[p] * v;
            cplx* o = out.at(p);
            for (int c = 0; c < 4; ++c) o[c] += w[c];
        }
    }
    return out;
}

SpinorField free_flow(const DiracMatrices& dm, const SpinorField& f, double t) {
    SpinorField fh = to_momentum(f);
    apply_matrix_field(fh, [&dm, t](const Vec3& k) {
        return free_propagator_symbol(dm, k, t);
    });
    return to_position(fh);
}

SpinorField free_resolvent_apply(const DiracMatrices& dm, const SpinorField& f, cplx z) {
    // reject z within a whisker of the grid symbol spectrum
    double lam_min = dm.mass;
    SpinorField fh = to_momentum(f);
    const long npts = f.grid.npoints();
    double dist = 1e300;
    for (long p = 0; p < npts; ++p) {
        double lam = std::sqrt(f.grid.k_at(p).squaredNorm() + dm.mass * dm.mass);
        dist = std::min({dist, std::abs(z - cplx(lam, 0)), std::abs(z + cplx(lam, 0))});
    }
    if (dist < 1e-12 * lam_min)
        throw std::domain_error("free_resolvent_apply: z collides with a grid symbol eigenvalue");
    apply_matrix_field(fh, [&dm, z](const Vec3& k) {
        return free_resolvent_symbol(dm, k, z);
    });
    return to_position(fh);
}

SpinorField free_cutoff_apply(const DiracMatrices& dm, const SpinorField& f,
                              const std::function<double(double)>& chi) {
    SpinorField fh = to_momentum(f);
    apply_matrix_field(fh, [&](const Vec3& k) { return spectral_cutoff_symbol(dm, k, chi); });
    return to_position(fh);
}

double hamiltonian_bound(const DiracMatrices& dm, const Grid& g, const Potential* V) {
    double lam_max = std::sqrt(g.k_corner() * g.k_corner() + dm.mass * dm.mass);
    return lam_max + (V ? V->sup_norm() : 0.0) + 0.1;
}

SpinorField chebyshev_function_of_h(const DiracMatrices& dm, const SpinorField& f,
                                    const Potential* V,
                                    const std::function<double(double)>& chi,
                                    int degree, double bound) {
    // Chebyshev coefficients of chi(bound * x) on [-1, 1]
    const int M = std::max(2 * degree, 256);
    std::vector<double> coeff(degree + 1, 0.0);
    for (int m = 0; m < M; ++m) {
        double theta = M_PI * (m + 0.5) / M;
        double val = chi(bound * std::cos(theta));
        for (int j = 0; j <= degree; ++j) coeff[j] += val * std::cos(j * theta);
    }
    for (int j = 0; j <= degree; ++j) coeff[j] *= (j == 0 ? 1.0 : 2.0) / M;

    // three-term recurrence on T_j(H / bound) f
    SpinorField t0 = f;
    SpinorField t1 = apply_hamiltonian(dm, f, V);
    for (auto& z : t1.data) z /= bound;
    SpinorField acc = scaled(t0, coeff[0]);
    if (degree >= 1) axpy(coeff[1], t1, acc);
    for (int j = 2; j <= degree; ++j) {
        SpinorField t2 = apply_hamiltonian(dm, t1, V);
        for (size_t i = 0; i < t2.data.size(); ++i)
            t2.data[i] = 2.0 * t2.data[i] / bound - t0.data[i];
        axpy(coeff[j], t2, acc);
        t0 = std::move(t1);
        t1 = std::move(t2);
    }
    return acc;
}

}  // namespace nlde
