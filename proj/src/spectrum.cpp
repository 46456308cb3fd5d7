#include "nlde/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "nlde/norms.hpp"
#include "nlde/snapshot.hpp"
#include "nlde/threading.hpp"

namespace nlde {

namespace {

SpinorField apply_h(const DiracMatrices& dm, const Potential& V, const SpinorField& f) {
    return apply_hamiltonian(dm, f, V.is_zero() ? nullptr : &V);
}

}  // namespace

std::vector<EigenPair> gap_eigenpairs(const DiracMatrices& dm, const Potential& V,
                                      const BoundStateOptions& opt) {
    const Grid& g = V.grid;
    double m = dm.mass;
    std::vector<double> shifts = opt.shifts;
    if (shifts.empty())
        for (double s : {0.93, 0.75, 0.5, 0.2, -0.2, -0.5, -0.75, -0.93})
            shifts.push_back(s * m);

    std::vector<EigenPair> found;
    CVec start(4 * g.npoints());
    // deterministic start vector: localized bump with all components
    {
        SpinorField f(g);
        for (long p = 0; p < g.npoints(); ++p) {
            double w = std::exp(-0.5 * g.x_at(p).squaredNorm());
            cplx* d = f.at(p);
            d[0] = w; d[1] = 0.7 * w; d[2] = 0.3 * w; d[3] = 0.1 * w;
        }
        start = f.data;
    }

    for (double sigma : shifts) {
        ResolventQuery q;
        q.z = cplx(sigma, 0.0);
        q.tol = opt.solver_tol;
        q.max_iter = 6000;
        LinOp op = [&](const CVec& x, CVec& y) {
            SpinorField xf(g);
            xf.data = x;
            SpinorField r = perturbed_resolvent(dm, q, V, xf);
            y = std::move(r.data);
        };
        std::vector<RitzPair> ritz;
        try {
            ritz = lanczos_hermitian(op, start, opt.lanczos_steps);
        } catch (const std::exception&) {
            continue;  // shift too close to an eigenvalue; neighbors cover it
        }
        for (auto& rp : ritz) {
            if (std::abs(rp.theta) < 1e-8) continue;
            double lam = sigma + 1.0 / rp.theta;
            if (!(lam > -m + opt.edge_margin && lam < m - opt.edge_margin)) continue;
            SpinorField v(g);
            v.data = rp.vector;
            double nv = norm2(v);
            for (auto& z : v.data) z /= nv;
            SpinorField hv = apply_h(dm, V, v);
            // Rayleigh polish of the eigenvalue
            lam = inner(v, hv).real();
            SpinorField res = hv;
            axpy(cplx(-lam, 0), v, res);
            double rnorm = norm2(res);
            if (rnorm > 1e-4) continue;  // unconverged Ritz direction
            bool dup = false;
            for (auto& e : found) {
                SpinorField ev(g);
                ev.data = e.vector;
                if (std::abs(lam - e.value) < 1e-7 && std::abs(inner(ev, v)) > 0.5) {
                    dup = true;
                    if (rnorm < e.residual) {  // keep the better copy
                        e.value = lam;
                        e.vector = v.data;
                        e.residual = rnorm;
                    }
                    break;
                }
            }
            if (!dup) {
                EigenPair e;
                e.value = lam;
                e.vector = v.data;
                e.residual = rnorm;
                found.push_back(std::move(e));
            }
        }
    }
    std::sort(found.begin(), found.end(),
              [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
    return found;
}

BoundStateSet bound_states(const DiracMatrices& dm, const Potential& V,
                           const BoundStateOptions& opt) {
    std::vector<EigenPair> pairs = gap_eigenpairs(dm, V, opt);
    double m = dm.mass;
    // filter to converged pairs
    std::vector<EigenPair> good;
    for (auto& e : pairs)
        if (e.residual <= opt.residual_tol * 100) good.push_back(e);

    if (good.size() < 2) {
        if (V.is_zero() || good.empty())
            throw std::runtime_error(
                "bound_states: no gap spectrum found; need two eigenvalues "
                "(choose a binding potential)");
        throw std::runtime_error("bound_states: only one gap eigenvalue; need two");
    }
    for (size_t i = 0; i + 1 < good.size(); ++i) {
        if (std::abs(good[i + 1].value - good[i].value) < opt.degeneracy_tol) {
            throw std::runtime_error(
                "bound_states: degenerate gap pair (Kramers obstruction for "
                "time-reversal-symmetric potentials); use the kramers_breaking "
                "family to split it");
        }
    }
    if (good.size() > 2)
        throw std::runtime_error("bound_states: more than two gap eigenvalues; "
                                 "configuration rejected");

    BoundStateSet b;
    b.lambda0 = good[0].value;
    b.lambda1 = good[1].value;
    b.phi0 = SpinorField(V.grid);
    b.phi0.data = good[0].vector;
    b.phi1 = SpinorField(V.grid);
    b.phi1.data = good[1].vector;
    // orthonormalize the pair (distinct eigenvalues: already near-orthogonal)
    cplx c01 = inner(b.phi0, b.phi1);
    axpy(-c01, b.phi0, b.phi1);
    for (auto* f : {&b.phi0, &b.phi1}) {
        double n = norm2(*f);
        for (auto& z : f->data) z /= n;
    }
    // fix the phase: largest-magnitude entry real positive (reproducibility)
    for (auto* f : {&b.phi0, &b.phi1}) {
        size_t imax = 0;
        double amax = 0;
        for (size_t i = 0; i < f->data.size(); ++i)
            if (std::abs(f->data[i]) > amax) { amax = std::abs(f->data[i]); imax = i; }
        cplx ph = f->data[imax] / amax;
        for (auto& z : f->data) z /= ph;
    }
    SpinorField h0 = apply_h(dm, V, b.phi0);
    axpy(cplx(-b.lambda0, 0), b.phi0, h0);
    b.residual0 = norm2(h0);
    SpinorField h1 = apply_h(dm, V, b.phi1);
    axpy(cplx(-b.lambda1, 0), b.phi1, h1);
    b.residual1 = norm2(h1);
    b.gap_margin = std::min({std::abs(b.lambda0 - m), std::abs(b.lambda0 + m),
                             std::abs(b.lambda1 - m), std::abs(b.lambda1 + m)});
    b.nonresonant = std::abs(b.lambda1 - b.lambda0) <
                    std::min(std::abs(b.lambda0 + m), std::abs(b.lambda0 - m));
    return b;
}

SpinorField project_continuous_h(const BoundStateSet& b, const SpinorField& f) {
    SpinorField out = f;
    axpy(-inner(b.phi0, f), b.phi0, out);
    axpy(-inner(b.phi1, f), b.phi1, out);
    return out;
}

namespace {

SpinorField free_plane_wave(const DiracMatrices& dm, const Grid& g, const Vec3& k, int j) {
    MomentumSymbol s = symbol_at(dm, k);
    Eigen::Vector4cd col = s.u_fw.col(j);
    SpinorField f(g);
    const cplx I(0, 1);
    for (long p = 0; p < g.npoints(); ++p) {
        cplx ph = std::exp(I * k.dot(g.x_at(p)));
        cplx* d = f.at(p);
        for (int c = 0; c < 4; ++c) d[c] = ph * col[c];
    }
    return f;
}

bool on_k_grid(const Grid& g, const Vec3& k) {
    for (int a = 0; a < 3; ++a) {
        double q = k[a] / g.dk;
        if (std::abs(q - std::round(q)) > 1e-9) return false;
        if (std::round(q) < -g.n / 2 || std::round(q) > g.n / 2 - 1) return false;
    }
    return true;
}

}  // namespace

DistortedWave distorted_wave(const DiracMatrices& dm, const Vec3& k, int j,
                             const Potential& V, const BoundStateSet* bound,
                             const BoundaryValueOptions& opt) {
    const Grid& g = V.grid;
    if (!on_k_grid(g, k))
        throw std::invalid_argument("distorted_wave: k must lie on the k-grid");
    double lam = std::sqrt(k.squaredNorm() + dm.mass * dm.mass);
    double lam_signed = (j < 2) ? lam : -lam;

    DistortedWave out;
    SpinorField psi0 = free_plane_wave(dm, g, k, j);
    if (V.is_zero()) {
        out.psi = psi0;
        out.w = SpinorField(g);
        return out;
    }
    SpinorField vpsi(g);
    {
        Eigen::Vector4cd v;
        for (long p = 0; p < g.npoints(); ++p) {
            const cplx* d = psi0.at(p);
            v << d[0], d[1], d[2], d[3];
            Eigen::Vector4cd w = V.values[p] * v;
            cplx* o = vpsi.at(p);
            for (int c = 0; c < 4; ++c) o[c] = w[c];
        }
    }
    SpinorField corr;
    if (k.squaredNorm() == 0.0) {
        // threshold row: Fredholm solve with the regularized R_0(±m)
        int sign = (j < 2) ? +1 : -1;
        SpinorField rhs = threshold_free_resolvent(dm, vpsi, sign);
        LinOp M = [&](const CVec& x, CVec& y) {
            SpinorField xf(g);
            xf.data = x;
            SpinorField vx(g);
            Eigen::Vector4cd v;
            for (long p = 0; p < g.npoints(); ++p) {
                const cplx* d = xf.at(p);
                v << d[0], d[1], d[2], d[3];
                Eigen::Vector4cd w = V.values[p] * v;
                cplx* o = vx.at(p);
                for (int c = 0; c < 4; ++c) o[c] = w[c];
            }
            SpinorField r = threshold_free_resolvent(dm, vx, sign);
            y = x;
            for (size_t i = 0; i < y.size(); ++i) y[i] += r.data[i];
        };
        CVec x(rhs.data.size(), cplx(0, 0));
        SolveReport rep = gmres(M, rhs.data, x, opt.tol, opt.max_iter);
        if (!rep.converged)
            throw std::runtime_error("distorted_wave: threshold solve stalled");
        corr = SpinorField(g);
        corr.data = std::move(x);
        out.bv_error = rep.residual;
    } else {
        BoundaryValue bv = boundary_value(dm, lam_signed, +1, V, vpsi, opt);
        if (bv.diverged)
            throw std::runtime_error("distorted_wave: boundary value diverged at this k");
        corr = bv.value;
        out.bv_error = bv.error;
    }
    out.psi = psi0;
    for (size_t i = 0; i < out.psi.data.size(); ++i) out.psi.data[i] -= corr.data[i];
    // scattered part w(k,x): e^{-ikx} psi - u(k) e_j
    out.w = out.psi;
    {
        MomentumSymbol s = symbol_at(dm, k);
        Eigen::Vector4cd col = s.u_fw.col(j);
        const cplx I(0, 1);
        for (long p = 0; p < g.npoints(); ++p) {
            cplx ph = std::exp(-I * k.dot(g.x_at(p)));
            cplx* d = out.w.at(p);
            for (int c = 0; c < 4; ++c) d[c] = ph * d[c] - col[c];
        }
    }
    SpinorField res = apply_h(dm, V, out.psi);
    axpy(cplx(-lam_signed, 0), out.psi, res);
    out.pde_residual = weighted_sobolev_norm(res, -opt.sigma_error, 0) / norm2(out.psi);
    if (bound) (void)bound;  // resonance PASS is the caller's precondition
    return out;
}

namespace {

constexpr char kTableMagic[8] = {'N', 'L', 'D', 'E', 'W', 'A', 'V', '1'};

bool load_table_cache(const std::string& path, DistortedWaveTable& t) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    char magic[8];
    std::uint32_t n = 0;
    double L = 0;
    std::uint64_t hash = 0;
    std::uint32_t polished = 0;
    bool ok = std::fread(magic, 1, 8, f) == 8 && std::memcmp(magic, kTableMagic, 8) == 0 &&
              std::fread(&n, 4, 1, f) == 1 && std::fread(&L, 8, 1, f) == 1 &&
              std::fread(&hash, 8, 1, f) == 1 && std::fread(&polished, 4, 1, f) == 1;
    if (!ok || n != static_cast<std::uint32_t>(t.grid.n) || L != t.grid.L ||
        hash != t.config_hash) {
        std::fclose(f);
        return false;
    }
    long nrows = 4 * t.grid.npoints();
    t.rows.assign(nrows, SpinorField(t.grid));
    t.lambda_signed.resize(nrows);
    t.pde_residuals.resize(nrows);
    std::uint64_t crc = 1469598103934665603ull;
    for (long r = 0; r < nrows && ok; ++r) {
        ok = std::fread(t.rows[r].data.data(), sizeof(cplx), t.rows[r].data.size(), f) ==
             t.rows[r].data.size();
        if (ok)
            crc = fnv1a(t.rows[r].data.data(), sizeof(cplx) * t.rows[r].data.size(), crc);
    }
    ok = ok && std::fread(t.lambda_signed.data(), 8, nrows, f) == static_cast<size_t>(nrows);
    ok = ok && std::fread(t.pde_residuals.data(), 8, nrows, f) == static_cast<size_t>(nrows);
    std::uint64_t stored = 0;
    ok = ok && std::fread(&stored, 8, 1, f) == 1 && stored == crc;
    std::fclose(f);
    if (ok) t.polished = polished != 0;
    return ok;
}

void save_table_cache(const std::string& path, const DistortedWaveTable& t) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) return;
    std::uint32_t n = t.grid.n;
    double L = t.grid.L;
    std::uint32_t polished = t.polished ? 1 : 0;
    std::fwrite(kTableMagic, 1, 8, f);
    std::fwrite(&n, 4, 1, f);
    std::fwrite(&L, 8, 1, f);
    std::fwrite(&t.config_hash, 8, 1, f);
    std::fwrite(&polished, 4, 1, f);
    std::uint64_t crc = 1469598103934665603ull;
    for (const auto& row : t.rows) {
        std::fwrite(row.data.data(), sizeof(cplx), row.data.size(), f);
        crc = fnv1a(row.data.data(), sizeof(cplx) * row.data.size(), crc);
    }
    std::fwrite(t.lambda_signed.data(), 8, t.lambda_signed.size(), f);
    std::fwrite(t.pde_residuals.data(), 8, t.pde_residuals.size(), f);
    std::fwrite(&crc, 8, 1, f);
    std::fclose(f);
}

}  // namespace

DistortedWaveTable build_wave_table(const DiracMatrices& dm, const Potential& V,
                                    const BoundStateSet& bound,
                                    const WaveTableOptions& opt) {
    const Grid& g = V.grid;
    DistortedWaveTable t;
    t.grid = g;
    t.config_hash = opt.config_hash;
    std::string cache_path;
    if (!opt.cache_dir.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "/wave_table_%016llx.bin",
                      static_cast<unsigned long long>(opt.config_hash));
        cache_path = opt.cache_dir + buf;
        if (load_table_cache(cache_path, t)) return t;
    }

    long npts = g.npoints();
    long nrows = 4 * npts;
    t.rows.assign(nrows, SpinorField(g));
    t.lambda_signed.assign(nrows, 0.0);
    t.pde_residuals.assign(nrows, 0.0);
    std::vector<double> bv_errors(nrows, 0.0);

    std::mutex err_mutex;
    std::string first_error;
    parallel_for(npts, opt.threads, [&](long lo, long hi) {
        for (long p = lo; p < hi; ++p) {
            Vec3 k = g.k_at(p);
            double lam = std::sqrt(k.squaredNorm() + dm.mass * dm.mass);
            for (int j = 0; j < 4; ++j) {
                try {
                    DistortedWave w = distorted_wave(dm, k, j, V, &bound, opt.bv);
                    long r = t.row_index(p, j);
                    t.rows[r] = std::move(w.psi);
                    t.lambda_signed[r] = (j < 2) ? lam : -lam;
                    t.pde_residuals[r] = w.pde_residual;
                    bv_errors[r] = w.bv_error;
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(err_mutex);
                    if (first_error.empty()) first_error = e.what();
                }
            }
        }
    });
    if (!first_error.empty())
        throw std::runtime_error("build_wave_table: " + first_error);
    t.max_bv_error = *std::max_element(bv_errors.begin(), bv_errors.end());

    // project every row onto ran P_c(H); for V = 0 the free rows are exact
    // eigenrows already and the transform is exactly Parseval
    if (!V.is_zero())
        for (auto& row : t.rows) row = project_continuous_h(bound, row);

    if (opt.parseval_polish && !V.is_zero()) {
        long dim = 4 * npts;
        if (dim > 4096)
            throw std::runtime_error(
                "build_wave_table: parseval polish needs the dense frame operator; "
                "use n <= 8 or disable it");
        // frame operator S = dk^3 dx^3 sum_r |psi_r><psi_r| / (2 pi)^3
        // (weights chosen so that S = P_c for the exact continuum transform)
        Eigen::MatrixXcd W(dim, nrows);
        for (long r = 0; r < nrows; ++r)
            for (long i = 0; i < dim; ++i) W(i, r) = t.rows[r].data[i];
        double wgt = g.k_cell_volume() * g.cell_volume() / std::pow(2 * M_PI, 3);
        Eigen::MatrixXcd S = wgt * (W * W.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
        // pseudo inverse square root with rank exactly dim - 2: the rows were
        // projected onto ran P_c (codimension 2), so S and P_c share their
        // range and the normalized frame resolves the identity on it
        Eigen::VectorXd ev = es.eigenvalues();
        Eigen::VectorXd inv_sqrt(dim);
        for (long i = 0; i < dim; ++i)
            inv_sqrt(i) = (i >= 2 && ev(i) > 0.0) ? 1.0 / std::sqrt(ev(i)) : 0.0;
        Eigen::MatrixXcd Sm12 =
            es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
        Eigen::MatrixXcd Wt = Sm12 * W;
        for (long r = 0; r < nrows; ++r)
            for (long i = 0; i < dim; ++i) t.rows[r].data[i] = Wt(i, r);
        t.polished = true;
    }
    if (!cache_path.empty()) save_table_cache(cache_path, t);
    return t;
}

SpinorField generalized_fourier(const DistortedWaveTable& table, const SpinorField& f) {
    const Grid& g = table.grid;
    if (!g.same_as(f.grid)) throw std::invalid_argument("generalized_fourier: grid mismatch");
    SpinorField out(g, SpaceTag::Momentum);
    const double c = std::pow(2 * M_PI, -1.5);
    long npts = g.npoints();
    for (long p = 0; p < npts; ++p)
        for (int j = 0; j < 4; ++j)
            out.at(p)[j] = c * inner(table.rows[table.row_index(p, j)], f);
    return out;
}

SpinorField generalized_fourier_adjoint(const DistortedWaveTable& table,
                                        const SpinorField& gkc) {
    const Grid& g = table.grid;
    if (gkc.tag != SpaceTag::Momentum)
        throw std::invalid_argument("generalized_fourier_adjoint: momentum field required");
    SpinorField out(g, SpaceTag::Position);
    const double c = std::pow(2 * M_PI, -1.5) * g.k_cell_volume();
    long npts = g.npoints();
    for (long p = 0; p < npts; ++p)
        for (int j = 0; j < 4; ++j) {
            cplx coeff = c * gkc.at(p)[j];
            if (coeff == cplx(0, 0)) continue;
            const SpinorField& row = table.rows[table.row_index(p, j)];
            for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += coeff * row.data[i];
        }
    return out;
}

SpinorField propagator_via_waves(const DistortedWaveTable& table, double t,
                                 const std::function<double(double)>& chi,
                                 const SpinorField& f) {
    SpinorField gk = generalized_fourier(table, f);
    const cplx I(0, 1);
    long npts = table.grid.npoints();
    for (long p = 0; p < npts; ++p)
        for (int j = 0; j < 4; ++j) {
            double lam = table.lambda_signed[table.row_index(p, j)];
            gk.at(p)[j] *= std::exp(-I * t * lam) * chi(lam);
        }
    return generalized_fourier_adjoint(table, gk);
}

Eigen::VectorXd dense_spectrum_oracle(const DiracMatrices& dm, const Potential& V,
                                      Eigen::MatrixXcd* vectors) {
    const Grid& g = V.grid;
    long dim = 4 * g.npoints();
    if (dim > 4096)
        throw std::invalid_argument("dense_spectrum_oracle: grid too large for dense");
    LinOp H = [&](const CVec& x, CVec& y) {
        SpinorField f(g);
        f.data = x;
        y = apply_h(dm, V, f).data;
    };
    Eigen::MatrixXcd M = dense_operator(H, dim);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        M, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (vectors) *vectors = es.eigenvectors();
    return es.eigenvalues();
}

}  // namespace nlde
