#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace treeseg {

/// Plain "key = value" text, one pair per line, '#' starting a comment.
using KeyValues = std::map<std::string, std::string>;

/// Throws FormatError (offset = line number) on a line without '='.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& values);

/// Typed lookups. A missing key leaves `out` untouched; a malformed value throws InvalidArgument
/// naming the key.
void read_value(const KeyValues& kv, const std::string& key, double& out);
void read_value(const KeyValues& kv, const std::string& key, std::size_t& out);
void read_value(const KeyValues& kv, const std::string& key, unsigned& out);
void read_value(const KeyValues& kv, const std::string& key, bool& out);
void read_value(const KeyValues& kv, const std::string& key, std::string& out);

/// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace treeseg
