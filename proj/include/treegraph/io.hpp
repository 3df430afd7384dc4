// Cloud and trunk file IO. CSV is the canonical interchange format; the
// binary format is a packed little-endian record stream for speed.
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "treegraph/types.hpp"

namespace treegraph {

enum class CloudFormat { csv, binary };

// .bin/.dat map to binary, everything else to csv.
CloudFormat format_from_extension(const std::filesystem::path& path);

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

inline PointCloud read_cloud(const std::filesystem::path& path) {
  return read_cloud(path, format_from_extension(path));
}
inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_from_extension(path));
}

// Trunk lists are small; CSV only, columns x,y,z,tree_id.
std::vector<TrunkPoint> read_trunks(const std::filesystem::path& path);
void write_trunks(std::span<const TrunkPoint> trunks, const std::filesystem::path& path);

// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

}  // namespace treegraph
