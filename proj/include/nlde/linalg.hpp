#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace nlde {

using CVec = std::vector<std::complex<double>>;
using LinOp = std::function<void(const CVec&, CVec&)>;  // y = A x

std::complex<double> cdot(const CVec& a, const CVec& b);  // conjugate-linear in a
double cnorm(const CVec& a);

struct SolveReport {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;  // relative
};

/// Restarted GMRES(m). x holds the initial guess on entry, the solution on
/// exit. Right-preconditioned when precond is set (solves A M^{-1} u = b,
/// x = M^{-1} u).
SolveReport gmres(const LinOp& A, const CVec& b, CVec& x, double tol, int max_iter,
                  int restart = 40, const LinOp* precond = nullptr);

struct EigenPair {
    double value = 0.0;
    CVec vector;
    double residual = 0.0;  // ||A v - value v|| with A the *original* operator
};

/// Hermitian Lanczos with full reorthogonalization applied to op (typically
/// a shift-inverted resolvent). Returns Ritz pairs of op.
struct RitzPair {
    double theta = 0.0;
    CVec vector;
};
std::vector<RitzPair> lanczos_hermitian(const LinOp& op, const CVec& start, int steps);

/// Builds the dense matrix of a linear operator by applying it to the
/// canonical basis (oracle-grade; dimension kept small by the caller).
Eigen::MatrixXcd dense_operator(const LinOp& A, long dim);

/// Smallest singular value via inverse power iteration on A* A using GMRES
/// solves with A and A*.
struct SigmaMinReport {
    double sigma_min = 0.0;
    bool converged = false;
    int iterations = 0;
};
SigmaMinReport smallest_singular_value(const LinOp& A, const LinOp& Astar, long dim,
                                       double tol, int max_outer, unsigned seed);

}  // namespace nlde
