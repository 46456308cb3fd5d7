#include "nlde/linalg.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace nlde {

using cplx = std::complex<double>;

cplx cdot(const CVec& a, const CVec& b) {
    cplx s(0, 0);
    for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double cnorm(const CVec& a) {
    double s = 0;
    for (const auto& z : a) s += std::norm(z);
    return std::sqrt(s);
}

namespace {
void waxpby(cplx alpha, const CVec& x, cplx beta, CVec& y) {
    for (size_t i = 0; i < y.size(); ++i) y[i] = alpha * x[i] + beta * y[i];
}
}  // namespace

SolveReport gmres(const LinOp& A, const CVec& b, CVec& x, double tol, int max_iter,
                  int restart, const LinOp* precond) {
    SolveReport rep;
    const size_t n = b.size();
    double bnorm = cnorm(b);
    if (bnorm == 0.0) {
        x.assign(n, cplx(0, 0));
        rep.converged = true;
        return rep;
    }
    if (x.size() != n) x.assign(n, cplx(0, 0));

    CVec r(n), w(n), z(n);
    int total_it = 0;
    while (total_it < max_iter) {
        A(x, r);
        for (size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        double beta = cnorm(r);
        rep.residual = beta / bnorm;
        if (rep.residual < tol) {
            rep.converged = true;
            rep.iterations = total_it;
            return rep;
        }
        int m = std::min(restart, max_iter - total_it);
        std::vector<CVec> V;
        V.reserve(m + 1);
        V.push_back(r);
        for (auto& v : V[0]) v /= beta;
        Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
        Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
        g(0) = beta;
        std::vector<cplx> cs(m), sn(m);
        int k = 0;
        for (; k < m; ++k) {
            ++total_it;
            const CVec* vin = &V[k];
            if (precond) {
                (*precond)(V[k], z);
                vin = &z;
            }
            A(*vin, w);
            // modified Gram-Schmidt with one reorthogonalization pass
            for (int pass = 0; pass < 2; ++pass)
                for (int j = 0; j <= k; ++j) {
                    cplx h = cdot(V[j], w);
                    if (pass == 0) H(j, k) = h; else H(j, k) += h;
                    waxpby(-h, V[j], cplx(1, 0), w);
                }
            double hn = cnorm(w);
            H(k + 1, k) = hn;
            if (hn > 1e-300) {
                V.push_back(w);
                for (auto& v : V.back()) v /= hn;
            }
            // complex Givens: with c = h1/d, s = h2/d the rotation acts as
            // (a1, a2) -> (conj(c) a1 + conj(s) a2, -s a1 + c a2)
            for (int j = 0; j < k; ++j) {
                cplx t = std::conj(cs[j]) * H(j, k) + std::conj(sn[j]) * H(j + 1, k);
                H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
                H(j, k) = t;
            }
            double denom = std::sqrt(std::norm(H(k, k)) + std::norm(H(k + 1, k)));
            if (denom < 1e-300) { cs[k] = 1; sn[k] = 0; }
            else { cs[k] = H(k, k) / denom; sn[k] = H(k + 1, k) / denom; }
            H(k, k) = std::conj(cs[k]) * H(k, k) + std::conj(sn[k]) * H(k + 1, k);
            H(k + 1, k) = 0;
            g(k + 1) = -sn[k] * g(k);
            g(k) = std::conj(cs[k]) * g(k);
            rep.residual = std::abs(g(k + 1)) / bnorm;
            if (rep.residual < tol || hn < 1e-300) { ++k; break; }
        }
        // back substitution
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(k);
        for (int i = k - 1; i >= 0; --i) {
            cplx s = g(i);
            for (int j = i + 1; j < k; ++j) s -= H(i, j) * y(j);
            y(i) = s / H(i, i);
        }
        CVec dx(n, cplx(0, 0));
        for (int j = 0; j < k; ++j) waxpby(y(j), V[j], cplx(1, 0), dx);
        if (precond) {
            (*precond)(dx, z);
            dx = z;
        }
        for (size_t i = 0; i < n; ++i) x[i] += dx[i];
        rep.iterations = total_it;
        if (rep.residual < tol) {
            // verify true residual after restart assembly
            A(x, r);
            for (size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
            rep.residual = cnorm(r) / bnorm;
            if (rep.residual < 3 * tol) {
                rep.converged = true;
                return rep;
            }
        }
    }
    rep.iterations = total_it;
    return rep;
}

std::vector<RitzPair> lanczos_hermitian(const LinOp& op, const CVec& start, int steps) {
    const size_t n = start.size();
    std::vector<CVec> V;
    std::vector<double> alpha, beta;
    CVec v = start, w(n);
    double nv = cnorm(v);
    if (nv == 0) throw std::invalid_argument("lanczos: zero start vector");
    for (auto& z : v) z /= nv;
    V.push_back(v);
    for (int j = 0; j < steps; ++j) {
        op(V[j], w);
        double a = cdot(V[j], w).real();
        alpha.push_back(a);
        waxpby(-a, V[j], cplx(1, 0), w);
        if (j > 0) waxpby(-beta[j - 1], V[j - 1], cplx(1, 0), w);
        // full reorthogonalization
        for (int pass = 0; pass < 2; ++pass)
            for (size_t i = 0; i < V.size(); ++i) {
                cplx h = cdot(V[i], w);
                waxpby(-h, V[i], cplx(1, 0), w);
            }
        double b = cnorm(w);
        if (b < 1e-13) break;
        beta.push_back(b);
        CVec vn = w;
        for (auto& z : vn) z /= b;
        V.push_back(vn);
    }
    int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    std::vector<RitzPair> out;
    for (int i = 0; i < m; ++i) {
        RitzPair rp;
        rp.theta = es.eigenvalues()(i);
        rp.vector.assign(n, cplx(0, 0));
        for (int j = 0; j < m; ++j)
            waxpby(es.eigenvectors()(j, i), V[j], cplx(1, 0), rp.vector);
        out.push_back(std::move(rp));
    }
    return out;
}

Eigen::MatrixXcd dense_operator(const LinOp& A, long dim) {
    Eigen::MatrixXcd M(dim, dim);
    CVec e(dim, cplx(0, 0)), col(dim);
    for (long j = 0; j < dim; ++j) {
        e[j] = 1;
        A(e, col);
        for (long i = 0; i < dim; ++i) M(i, j) = col[i];
        e[j] = 0;
    }
    return M;
}

SigmaMinReport smallest_singular_value(const LinOp& A, const LinOp& Astar, long dim,
                                       double tol, int max_outer, unsigned seed) {
    SigmaMinReport rep;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    CVec x(dim);
    for (auto& z : x) z = cplx(gauss(rng), gauss(rng));
    double nx = cnorm(x);
    for (auto& z : x) z /= nx;

    double mu_prev = 0.0;
    CVec y(dim), w(dim);
    for (int it = 0; it < max_outer; ++it) {
        // w = (A* A)^{-1} x  via two solves
        SolveReport r1 = gmres(Astar, x, y, 1e-9, 5000);
        SolveReport r2 = gmres(A, y, w, 1e-9, 5000);
        if (!r1.converged || !r2.converged) return rep;  // non-convergence
        double nw = cnorm(w);
        double mu = 1.0 / std::sqrt(nw);  // |x|=1: sigma_min^2 ~ 1/|w|
        for (auto& z : w) z /= nw;
        x = w;
        rep.iterations = it + 1;
        if (it > 0 && std::abs(mu - mu_prev) < tol * std::max(mu, 1e-300)) {
            rep.sigma_min = mu;
            rep.converged = true;
            return rep;
        }
        mu_prev = mu;
    }
    rep.sigma_min = mu_prev;
    rep.converged = true;  // slow but stabilized
    return rep;
}

}  // namespace nlde
