#include "nlde/nonlinearity.hpp"

namespace nlde {

namespace {

inline double bdot(const Vec4c& a, const Vec4c& b) {
    // <beta a, b> real part with the diag(1,1,-1,-1) signature
    return (std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] - std::conj(a[2]) * b[2] -
            std::conj(a[3]) * b[3]).real();
}

inline Vec4c bmul(const Vec4c& z) {
    Vec4c w = z;
    w[2] = -w[2];
    w[3] = -w[3];
    return w;
}

inline double rdot(const Vec4c& a, const Vec4c& b) { return a.dot(b).real(); }

}  // namespace

double NonlinearityModel::F(const Vec4c& z) const {
    if (family == NonlinearityFamily::SolerQuartic) {
        double g = bdot(z, z);
        return kappa * g * g;
    }
    double n = z.squaredNorm();
    return kappa * n * n;
}

Vec4c NonlinearityModel::gradF(const Vec4c& z) const {
    if (family == NonlinearityFamily::SolerQuartic)
        return 4.0 * kappa * bdot(z, z) * bmul(z);
    return 4.0 * kappa * z.squaredNorm() * z;
}

Vec4c NonlinearityModel::d2F(const Vec4c& z, const Vec4c& h) const {
    if (family == NonlinearityFamily::SolerQuartic)
        return 4.0 * kappa * (2.0 * bdot(z, h) * bmul(z) + bdot(z, z) * bmul(h));
    return 4.0 * kappa * (2.0 * rdot(z, h) * z + z.squaredNorm() * h);
}

Vec4c NonlinearityModel::d3F(const Vec4c& z, const Vec4c& h, const Vec4c& w) const {
    if (family == NonlinearityFamily::SolerQuartic)
        return 8.0 * kappa * (bdot(w, h) * bmul(z) + bdot(z, h) * bmul(w) +
                              bdot(z, w) * bmul(h));
    return 8.0 * kappa * (rdot(w, h) * z + rdot(z, h) * w + rdot(z, w) * h);
}

Mat8 NonlinearityModel::d2F_matrix(const Vec4c& z) const {
    Mat8 m;
    for (int c = 0; c < 8; ++c) {
        Vec4c h = Vec4c::Zero();
        if (c < 4)
            h[c] = 1.0;
        else
            h[c - 4] = cplx(0, 1);
        Vec4c out = d2F(z, h);
        for (int r = 0; r < 4; ++r) {
            m(r, c) = out[r].real();
            m(4 + r, c) = out[r].imag();
        }
    }
    return m;
}

SpinorField NonlinearityModel::gradF_field(const SpinorField& f) const {
    SpinorField out(f.grid);
    Vec4c z;
    for (long p = 0; p < f.grid.npoints(); ++p) {
        const cplx* d = f.at(p);
        z << d[0], d[1], d[2], d[3];
        Vec4c w = gradF(z);
        cplx* o = out.at(p);
        for (int c = 0; c < 4; ++c) o[c] = w[c];
    }
    return out;
}

SpinorField NonlinearityModel::d2F_field(const SpinorField& s, const SpinorField& h) const {
    SpinorField out(s.grid);
    Vec4c z, v;
    for (long p = 0; p < s.grid.npoints(); ++p) {
        const cplx* ds = s.at(p);
        const cplx* dh = h.at(p);
        z << ds[0], ds[1], ds[2], ds[3];
        v << dh[0], dh[1], dh[2], dh[3];
        Vec4c w = d2F(z, v);
        cplx* o = out.at(p);
        for (int c = 0; c < 4; ++c) o[c] = w[c];
    }
    return out;
}

SpinorField NonlinearityModel::remainder_field(const SpinorField& s,
                                               const SpinorField& eta) const {
    SpinorField out(s.grid);
    Vec4c z, e;
    for (long p = 0; p < s.grid.npoints(); ++p) {
        const cplx* ds = s.at(p);
        const cplx* de = eta.at(p);
        z << ds[0], ds[1], ds[2], ds[3];
        e << de[0], de[1], de[2], de[3];
        Vec4c w = gradF(z + e) - gradF(z) - d2F(z, e);
        cplx* o = out.at(p);
        for (int c = 0; c < 4; ++c) o[c] = w[c];
    }
    return out;
}

}  // namespace nlde
