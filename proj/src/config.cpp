#include "treeseg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "treeseg/error.hpp"

namespace treeseg {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
void parse_number(const KeyValues& kv, const std::string& key, T& out) {
  const auto it = kv.find(key);
  if (it == kv.end()) return;
  const std::string& text = it->second;
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("invalid value for '" + key + "': '" + text + "'");
  }
  out = value;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected key=value", line_no);
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(line_no) + ": empty key", line_no);
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_key_values(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

void read_value(const KeyValues& kv, const std::string& key, double& out) { parse_number(kv, key, out); }
void read_value(const KeyValues& kv, const std::string& key, std::size_t& out) { parse_number(kv, key, out); }
void read_value(const KeyValues& kv, const std::string& key, unsigned& out) { parse_number(kv, key, out); }

void read_value(const KeyValues& kv, const std::string& key, bool& out) {
  const auto it = kv.find(key);
  if (it == kv.end()) return;
  if (it->second == "true" || it->second == "1") {
    out = true;
  } else if (it->second == "false" || it->second == "0") {
    out = false;
  } else {
    throw InvalidArgument("invalid value for '" + key + "': '" + it->second + "'");
  }
}

void read_value(const KeyValues& kv, const std::string& key, std::string& out) {
  const auto it = kv.find(key);
  if (it != kv.end()) out = it->second;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace treeseg
