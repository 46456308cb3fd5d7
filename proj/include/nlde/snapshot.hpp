#pragma once

#include <cstdint>
#include <string>

#include "nlde/grid.hpp"

namespace nlde {

/// Binary field snapshot: magic, version, n, L, component count (4 or 8),
/// little-endian f64 (re, im) interleaved per component, trailing FNV-1a
/// checksum of the payload. Bit-exact round trip.
void save_snapshot(const SpinorField& f, const std::string& path);
void save_snapshot(const RealSpinorField& f, const std::string& path);

SpinorField load_snapshot(const std::string& path, const Grid& expected);
RealSpinorField load_real_snapshot(const std::string& path, const Grid& expected);

std::uint64_t fnv1a(const void* data, std::size_t nbytes,
                    std::uint64_t seed = 1469598103934665603ull);

}  // namespace nlde
