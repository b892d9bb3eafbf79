#ifndef BUBBLELAB_SNAPSHOT_HPP
#define BUBBLELAB_SNAPSHOT_HPP

// Field snapshots: raw little-endian float64 (node-major, component fastest)
// in <name>.bin with a JSON sidecar <name>.meta.json.

#include "bubblelab/torus.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace bubblelab {

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Snapshot {
  int n = 0;
  Vec3Field field;
};

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(const void* data, std::size_t bytes);

/// Sidecar path for a .bin path: field.bin -> field.meta.json.
std::filesystem::path meta_path(const std::filesystem::path& bin);

void write_snapshot(const std::filesystem::path& bin, const Grid& grid, const Vec3Field& field);

/// Throws SnapshotError on a malformed sidecar, a size that disagrees with
/// the declared dimensions, or a checksum mismatch.
Snapshot read_snapshot(const std::filesystem::path& bin);

}  // namespace bubblelab

#endif  // BUBBLELAB_SNAPSHOT_HPP
