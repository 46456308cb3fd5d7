#include "nlde/snapshot.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

namespace nlde {

namespace {

constexpr char kMagic[8] = {'N', 'L', 'D', 'E', 'F', 'L', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void write_exact(std::FILE* f, const void* p, size_t n) {
    if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("snapshot: short write");
}

void read_exact(std::FILE* f, void* p, size_t n) {
    if (std::fread(p, 1, n, f) != n) throw std::runtime_error("snapshot: short read");
}

void save_payload(const std::string& path, std::uint32_t n, double L,
                  std::uint32_t ncomp, const double* payload, size_t ndoubles) {
    File f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("snapshot: cannot open " + path);
    write_exact(f.get(), kMagic, 8);
    write_exact(f.get(), &kVersion, 4);
    write_exact(f.get(), &n, 4);
    write_exact(f.get(), &L, 8);
    write_exact(f.get(), &ncomp, 4);
    write_exact(f.get(), payload, 8 * ndoubles);
    std::uint64_t crc = fnv1a(payload, 8 * ndoubles);
    write_exact(f.get(), &crc, 8);
}

void load_payload(const std::string& path, std::uint32_t expected_n, double expected_L,
                  std::uint32_t expected_ncomp, double* payload, size_t ndoubles) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("snapshot: cannot open " + path);
    char magic[8];
    std::uint32_t ver = 0, n = 0, ncomp = 0;
    double L = 0;
    read_exact(f.get(), magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("snapshot: bad magic");
    read_exact(f.get(), &ver, 4);
    if (ver != kVersion) throw std::runtime_error("snapshot: unsupported version");
    read_exact(f.get(), &n, 4);
    read_exact(f.get(), &L, 8);
    read_exact(f.get(), &ncomp, 4);
    if (n != expected_n || L != expected_L || ncomp != expected_ncomp)
        throw std::runtime_error("snapshot: dimension mismatch");
    read_exact(f.get(), payload, 8 * ndoubles);
    std::uint64_t crc = 0;
    read_exact(f.get(), &crc, 8);
    if (crc != fnv1a(payload, 8 * ndoubles))
        throw std::runtime_error("snapshot: checksum mismatch");
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t nbytes, std::uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < nbytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

void save_snapshot(const SpinorField& f, const std::string& path) {
    save_payload(path, f.grid.n, f.grid.L, 4,
                 reinterpret_cast<const double*>(f.data.data()), 2 * f.data.size());
}

void save_snapshot(const RealSpinorField& f, const std::string& path) {
    // 8 components, imaginary slots zero
    std::vector<double> buf(2 * f.data.size(), 0.0);
    for (size_t i = 0; i < f.data.size(); ++i) buf[2 * i] = f.data[i];
    save_payload(path, f.grid.n, f.grid.L, 8, buf.data(), buf.size());
}

SpinorField load_snapshot(const std::string& path, const Grid& expected) {
    SpinorField f(expected);
    load_payload(path, expected.n, expected.L, 4,
                 reinterpret_cast<double*>(f.data.data()), 2 * f.data.size());
    return f;
}

RealSpinorField load_real_snapshot(const std::string& path, const Grid& expected) {
    RealSpinorField f(expected);
    std::vector<double> buf(2 * f.data.size());
    load_payload(path, expected.n, expected.L, 8, buf.data(), buf.size());
    for (size_t i = 0; i < f.data.size(); ++i) f.data[i] = buf[2 * i];
    return f;
}

}  // namespace nlde
