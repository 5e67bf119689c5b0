#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "treeseg/cloud.hpp"

namespace treeseg {

enum class CloudFormat {
  /// `x y z treeID annotated_flag` per line, '#' starts a comment. Three-column files carry no labels.
  Text,
  /// Little-endian "FSEG" container: header, f64 triples, optional label and attribute blocks.
  Binary,
  /// ASPRS LAS 1.2-1.4, point formats 0-7. Labels come from classification + a "treeID" extra-bytes channel.
  Las,
};

/// Picks the format from the file extension: .txt/.xyz/.csv -> Text, .las -> Las, anything else -> Binary.
CloudFormat format_from_path(const std::filesystem::path& path);
std::string_view to_string(CloudFormat format);
CloudFormat parse_format(std::string_view name);

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format);
inline PointCloud read_cloud(const std::filesystem::path& path) {
  return read_cloud(path, format_from_path(path));
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_from_path(path));
}

// In-memory codecs. Errors are FormatError carrying the line number (text) or byte offset.
PointCloud parse_text_cloud(std::string_view text);
std::string format_text_cloud(const PointCloud& cloud);
PointCloud decode_binary_cloud(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_binary_cloud(const PointCloud& cloud);
PointCloud decode_las(std::span<const std::uint8_t> bytes);
/// LAS 1.4, point format 6, with a u32 "treeID" extra-bytes channel. Coordinates are stored
/// with a 0.1 mm scale relative to the bounding-box minimum.
std::vector<std::uint8_t> encode_las(const PointCloud& cloud);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace treeseg
