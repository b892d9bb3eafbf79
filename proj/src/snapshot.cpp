#include "bubblelab/snapshot.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bubblelab {

static_assert(std::endian::native == std::endian::little,
              "snapshots are written in host byte order, which must be little-endian");

namespace {

constexpr const char* kDtype = "float64-little-endian";
constexpr const char* kLayout = "row-major, component-fastest";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t k = 0; k < bytes; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::filesystem::path meta_path(const std::filesystem::path& bin) {
  std::filesystem::path meta = bin;
  meta.replace_extension(".meta.json");
  return meta;
}

void write_snapshot(const std::filesystem::path& bin, const Grid& grid, const Vec3Field& field) {
  detail::check_size(grid, field);
  const std::size_t bytes = std::size_t(field.size()) * sizeof(double);

  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  if (!out) throw SnapshotError("cannot open " + bin.string() + " for writing");
  out.write(reinterpret_cast<const char*>(field.data()), std::streamsize(bytes));
  if (!out) throw SnapshotError("short write to " + bin.string());

  nlohmann::json meta = {{"n", grid.n()},
                         {"components", 3},
                         {"dtype", kDtype},
                         {"layout", kLayout},
                         {"checksum_fnv1a64", hex64(fnv1a64(field.data(), bytes))}};
  std::ofstream m(meta_path(bin), std::ios::trunc);
  if (!m) throw SnapshotError("cannot open " + meta_path(bin).string() + " for writing");
  m << meta.dump(2) << '\n';
}

Snapshot read_snapshot(const std::filesystem::path& bin) {
  std::ifstream m(meta_path(bin));
  if (!m) throw SnapshotError("missing sidecar " + meta_path(bin).string());
  nlohmann::json meta;
  int n = 0, components = 0;
  std::string checksum;
  try {
    meta = nlohmann::json::parse(m);
    n = meta.at("n").get<int>();
    components = meta.at("components").get<int>();
    checksum = meta.at("checksum_fnv1a64").get<std::string>();
    if (meta.at("dtype").get<std::string>() != kDtype ||
        meta.at("layout").get<std::string>() != kLayout)
      throw SnapshotError("unsupported dtype or layout in " + meta_path(bin).string());
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError("malformed sidecar " + meta_path(bin).string() + ": " + e.what());
  }
  if (components != 3 || n < 64 || (n & (n - 1)) != 0)
    throw SnapshotError("dimension mismatch: sidecar declares n = " + std::to_string(n) +
                        ", components = " + std::to_string(components));

  const std::size_t expected = std::size_t(n) * n * 3 * sizeof(double);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(bin, ec);
  if (ec) throw SnapshotError("cannot stat " + bin.string());
  if (actual != expected)
    throw SnapshotError("dimension mismatch: " + bin.string() + " holds " + std::to_string(actual) +
                        " bytes, sidecar implies " + std::to_string(expected));

  Snapshot snap;
  snap.n = n;
  snap.field.resize(3, Eigen::Index(n) * n);
  std::ifstream in(bin, std::ios::binary);
  in.read(reinterpret_cast<char*>(snap.field.data()), std::streamsize(expected));
  if (!in) throw SnapshotError("short read from " + bin.string());
  if (hex64(fnv1a64(snap.field.data(), expected)) != checksum)
    throw SnapshotError("checksum mismatch for " + bin.string());
  return snap;
}

}  // namespace bubblelab
