#include "treeseg/cloud_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "treeseg/bytes.hpp"

namespace treeseg {
namespace {

constexpr std::array<char, 4> kBinaryMagic = {'F', 'S', 'E', 'G'};
constexpr std::uint16_t kBinaryVersion = 1;
constexpr std::uint32_t kFlagLabels = 1u << 0;
constexpr std::uint32_t kFlagAttributes = 1u << 1;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

PointLabel label_from_fields(std::uint32_t tree_id, bool annotated) {
  if (!annotated) return PointLabel::non_annotated();
  return tree_id == 0 ? PointLabel::non_tree() : PointLabel::tree(tree_id);
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".txt" || ext == ".xyz" || ext == ".csv") return CloudFormat::Text;
  if (ext == ".las") return CloudFormat::Las;
  return CloudFormat::Binary;
}

std::string_view to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::Text:
      return "text";
    case CloudFormat::Binary:
      return "binary";
    case CloudFormat::Las:
      return "las";
  }
  return "?";
}

CloudFormat parse_format(std::string_view name) {
  const std::string n = lower(name);
  if (n == "text" || n == "txt") return CloudFormat::Text;
  if (n == "binary" || n == "bin" || n == "fseg") return CloudFormat::Binary;
  if (n == "las") return CloudFormat::Las;
  throw InvalidArgument("unknown cloud format '" + std::string(name) + "'");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw DataError("failed reading '" + path.string() + "'");
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------- text

PointCloud parse_text_cloud(std::string_view text) {
  PointCloud cloud;
  std::vector<PointLabel> labels;
  int columns = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::array<std::string_view, 6> tokens;
    int n = 0;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (n == static_cast<int>(tokens.size())) {
        throw FormatError("line " + std::to_string(line_no) + ": too many columns", line_no);
      }
      tokens[n++] = line.substr(i, j - i);
      i = j;
    }
    if (n == 0) continue;
    if (n != 3 && n != 5) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 3 or 5 columns, found " +
                            std::to_string(n),
                        line_no);
    }
    if (columns == 0) columns = n;
    if (n != columns) {
      throw FormatError("line " + std::to_string(line_no) + ": column count " + std::to_string(n) +
                            " differs from earlier lines (" + std::to_string(columns) + ")",
                        line_no);
    }
    double xyz[3];
    for (int c = 0; c < 3; ++c) {
      const auto tok = tokens[c];
      const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), xyz[c]);
      if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(xyz[c])) {
        throw FormatError("line " + std::to_string(line_no) + ": invalid coordinate '" +
                              std::string(tok) + "'",
                          line_no);
      }
    }
    cloud.points.push_back({xyz[0], xyz[1], xyz[2]});
    if (n == 5) {
      std::uint32_t tree_id = 0;
      unsigned flag = 0;
      const auto t3 = tokens[3];
      const auto t4 = tokens[4];
      const auto r3 = std::from_chars(t3.data(), t3.data() + t3.size(), tree_id);
      const auto r4 = std::from_chars(t4.data(), t4.data() + t4.size(), flag);
      if (r3.ec != std::errc() || r3.ptr != t3.data() + t3.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": invalid treeID '" +
                              std::string(t3) + "'",
                          line_no);
      }
      if (r4.ec != std::errc() || r4.ptr != t4.data() + t4.size() || flag > 1) {
        throw FormatError("line " + std::to_string(line_no) + ": annotated flag must be 0 or 1",
                          line_no);
      }
      labels.push_back(label_from_fields(tree_id, flag == 1));
    }
  }
  if (columns == 5) cloud.labels = std::move(labels);
  return cloud;
}

std::string format_text_cloud(const PointCloud& cloud) {
  cloud.validate();
  std::string out;
  out.reserve(cloud.size() * 64);
  out += cloud.has_labels() ? "# x y z treeID annotated_flag\n" : "# x y z\n";
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    put(p.x);
    out += ' ';
    put(p.y);
    out += ' ';
    put(p.z);
    if (cloud.labels) {
      const auto& l = (*cloud.labels)[i];
      out += ' ';
      out += std::to_string(l.tree_id());
      out += l.is_annotated() ? " 1" : " 0";
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------- binary

std::vector<std::uint8_t> encode_binary_cloud(const PointCloud& cloud) {
  cloud.validate();
  ByteWriter w;
  w.write_bytes(std::string_view(kBinaryMagic.data(), kBinaryMagic.size()));
  w.write<std::uint16_t>(kBinaryVersion);
  w.write<std::uint64_t>(cloud.size());
  std::uint32_t flags = 0;
  if (cloud.labels) flags |= kFlagLabels;
  if (!cloud.attributes.empty()) flags |= kFlagAttributes;
  w.write<std::uint32_t>(flags);
  for (const auto& p : cloud.points) {
    w.write(p.x);
    w.write(p.y);
    w.write(p.z);
  }
  if (cloud.labels) {
    for (const auto& l : *cloud.labels) {
      w.write<std::uint32_t>(l.tree_id());
      w.write<std::uint8_t>(l.is_annotated() ? 1 : 0);
    }
  }
  if (!cloud.attributes.empty()) {
    w.write<std::uint32_t>(static_cast<std::uint32_t>(cloud.attributes.size()));
    for (const auto& [name, values] : cloud.attributes) {
      if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw InvalidArgument("attribute name too long: " + name.substr(0, 32) + "...");
      }
      w.write<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
      w.write_bytes(name);
      for (double v : values) w.write(v);
    }
  }
  return w.take();
}

PointCloud decode_binary_cloud(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "binary cloud");
  const std::string magic = r.read_string(4, "magic");
  if (magic != std::string_view(kBinaryMagic.data(), kBinaryMagic.size())) {
    r.fail("bad magic, expected FSEG", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.read<std::uint16_t>("version");
  if (version != kBinaryVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const auto count = r.read<std::uint64_t>("point count");
  const auto flags = r.read<std::uint32_t>("flags");
  if (count > r.remaining() / 24) {
    r.fail("truncated point block: header declares " + std::to_string(count) + " points",
           r.offset());
  }
  PointCloud cloud;
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    const std::size_t at = r.offset();
    p.x = r.read<double>("coordinates");
    p.y = r.read<double>("coordinates");
    p.z = r.read<double>("coordinates");
    if (!p.finite()) r.fail("non-finite coordinate", at);
  }
  if (flags & kFlagLabels) {
    r.require(count * 5, "label block");
    std::vector<PointLabel> labels;
    labels.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto id = r.read<std::uint32_t>("label");
      const std::size_t flag_at = r.offset();
      const auto flag = r.read<std::uint8_t>("label");
      if (flag > 1) r.fail("annotated flag must be 0 or 1", flag_at);
      labels.push_back(label_from_fields(id, flag == 1));
    }
    cloud.labels = std::move(labels);
  }
  if (flags & kFlagAttributes) {
    const auto channels = r.read<std::uint32_t>("attribute count");
    for (std::uint32_t c = 0; c < channels; ++c) {
      const auto len = r.read<std::uint16_t>("attribute name length");
      std::string name = r.read_string(len, "attribute name");
      r.require(count * 8, "attribute '" + name + "'");
      std::vector<double> values(count);
      for (auto& v : values) v = r.read<double>();
      cloud.attributes[std::move(name)] = std::move(values);
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after cloud data", r.offset());
  return cloud;
}

// ---------------------------------------------------------------------------- LAS

namespace {

constexpr std::array<std::uint16_t, 8> kLasRecordSize = {20, 28, 26, 34, 57, 63, 30, 36};
constexpr std::array<std::size_t, 11> kExtraByteSize = {0, 1, 1, 2, 2, 4, 4, 8, 8, 4, 8};

struct ExtraBytesChannel {
  std::string name;
  std::uint8_t type = 0;
  std::size_t offset = 0;  // within the extra-bytes region of a record
  std::size_t size = 0;
};

double read_extra_value(const std::uint8_t* p, std::uint8_t type) {
  auto get = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  switch (type) {
    case 1: return get(std::uint8_t{});
    case 2: return get(std::int8_t{});
    case 3: return get(std::uint16_t{});
    case 4: return get(std::int16_t{});
    case 5: return get(std::uint32_t{});
    case 6: return get(std::int32_t{});
    case 7: return get(std::uint64_t{});
    case 8: return get(std::int64_t{});
    case 9: return get(float{});
    case 10: return get(double{});
    default: return 0.0;
  }
}

bool is_tree_id_name(std::string_view name) {
  const std::string n = lower(name);
  return n == "treeid" || n == "tree_id";
}

}  // namespace

PointCloud decode_las(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "LAS");
  if (r.read_string(4, "signature") != "LASF") r.fail("missing LASF signature", 0);
  const auto major = r.peek_at<std::uint8_t>(24, "version");
  const auto minor = r.peek_at<std::uint8_t>(25, "version");
  if (major != 1 || minor < 2 || minor > 4) {
    r.fail("unsupported LAS version " + std::to_string(major) + "." + std::to_string(minor), 24);
  }
  const auto header_size = r.peek_at<std::uint16_t>(94, "header size");
  const std::size_t min_header = minor == 4 ? 375 : 227;
  if (header_size < min_header || header_size > bytes.size()) {
    r.fail("invalid header size " + std::to_string(header_size), 94);
  }
  const auto point_offset = r.peek_at<std::uint32_t>(96, "point data offset");
  const auto vlr_count = r.peek_at<std::uint32_t>(100, "VLR count");
  const auto format_byte = r.peek_at<std::uint8_t>(104, "point format");
  const std::uint8_t format = format_byte & 0x3f;
  if (format_byte & 0xc0) r.fail("compressed (LAZ) point data is not supported", 104);
  if (format >= kLasRecordSize.size()) {
    r.fail("unsupported point data format " + std::to_string(format), 104);
  }
  const auto record_len = r.peek_at<std::uint16_t>(105, "record length");
  if (record_len < kLasRecordSize[format]) {
    r.fail("record length " + std::to_string(record_len) + " is shorter than format " +
               std::to_string(format) + " requires",
           105);
  }
  std::uint64_t count = r.peek_at<std::uint32_t>(107, "point count");
  if (minor == 4) {
    const auto count64 = r.peek_at<std::uint64_t>(247, "point count");
    if (count64 != 0) count = count64;
  }
  const double scale[3] = {r.peek_at<double>(131), r.peek_at<double>(139), r.peek_at<double>(147)};
  const double shift[3] = {r.peek_at<double>(155), r.peek_at<double>(163), r.peek_at<double>(171)};
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(scale[a]) || scale[a] == 0.0) r.fail("invalid scale factor", 131 + 8 * a);
  }

  // VLRs: look for the extra-bytes descriptor (LASF_Spec / 4).
  std::vector<ExtraBytesChannel> channels;
  r.seek(header_size);
  for (std::uint32_t v = 0; v < vlr_count; ++v) {
    const std::size_t vlr_at = r.offset();
    r.read<std::uint16_t>("VLR header");
    std::string user_id = r.read_string(16, "VLR header");
    user_id = user_id.substr(0, user_id.find('\0'));
    const auto record_id = r.read<std::uint16_t>("VLR header");
    const auto length = r.read<std::uint16_t>("VLR header");
    r.read_string(32, "VLR header");
    const std::size_t body_at = r.offset();
    r.require(length, "VLR body");
    if (user_id == "LASF_Spec" && record_id == 4) {
      if (length % 192 != 0) r.fail("extra-bytes VLR length is not a multiple of 192", vlr_at);
      std::size_t running = 0;
      for (std::size_t d = 0; d < length / 192u; ++d) {
        const std::size_t at = body_at + d * 192;
        ExtraBytesChannel ch;
        ch.type = r.peek_at<std::uint8_t>(at + 2);
        const auto options = r.peek_at<std::uint8_t>(at + 3);
        std::string name(reinterpret_cast<const char*>(bytes.data() + at + 4), 32);
        ch.name = name.substr(0, name.find('\0'));
        if (ch.type == 0) {
          ch.size = options;
        } else if (ch.type < kExtraByteSize.size()) {
          ch.size = kExtraByteSize[ch.type];
        } else {
          r.fail("unsupported extra-bytes data type " + std::to_string(ch.type) + " for '" +
                     ch.name + "'",
                 at + 2);
        }
        ch.offset = running;
        running += ch.size;
        channels.push_back(std::move(ch));
      }
      if (running > static_cast<std::size_t>(record_len - kLasRecordSize[format])) {
        r.fail("extra-bytes descriptors exceed the point record length", body_at);
      }
    }
    r.seek(body_at + length);
  }

  const ExtraBytesChannel* tree_channel = nullptr;
  for (const auto& ch : channels) {
    if (is_tree_id_name(ch.name) && ch.type != 0) {
      tree_channel = &ch;
      break;
    }
  }

  if (point_offset < r.offset() && vlr_count > 0) {
    r.fail("point data offset overlaps the VLRs", 96);
  }
  if (point_offset > bytes.size()) r.fail("point data offset beyond end of file", 96);
  const std::uint64_t available = (bytes.size() - point_offset) / record_len;
  if (available < count) {
    r.fail("truncated point records: header declares " + std::to_string(count) + ", file holds " +
               std::to_string(available),
           point_offset + available * record_len);
  }

  PointCloud cloud;
  cloud.points.resize(count);
  std::vector<PointLabel> labels;
  if (tree_channel) labels.resize(count);
  const std::size_t class_at = format >= 6 ? 16 : 15;
  const std::size_t extra_at = kLasRecordSize[format];
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint8_t* rec = bytes.data() + point_offset + i * record_len;
    std::int32_t raw[3];
    std::memcpy(raw, rec, 12);
    cloud.points[i] = {raw[0] * scale[0] + shift[0], raw[1] * scale[1] + shift[1],
                       raw[2] * scale[2] + shift[2]};
    if (tree_channel) {
      std::uint8_t cls = rec[class_at];
      if (format < 6) cls &= 0x1f;
      const double id = read_extra_value(rec + extra_at + tree_channel->offset, tree_channel->type);
      if (id < 0 || id > std::numeric_limits<std::uint32_t>::max() || id != std::floor(id)) {
        r.fail("treeID value " + std::to_string(id) + " is not a valid id",
               point_offset + i * record_len + extra_at + tree_channel->offset);
      }
      labels[i] = label_from_fields(static_cast<std::uint32_t>(id), cls != 0);
    }
  }
  if (tree_channel) cloud.labels = std::move(labels);
  return cloud;
}

std::vector<std::uint8_t> encode_las(const PointCloud& cloud) {
  cloud.validate();
  constexpr double kScale = 1e-4;
  constexpr std::uint16_t kHeaderSize = 375;
  constexpr std::uint16_t kRecordLen = 30 + 4;
  constexpr std::uint32_t kVlrSize = 54 + 192;

  Point3 lo{0, 0, 0}, hi{0, 0, 0};
  if (!cloud.empty()) {
    lo = hi = cloud.points.front();
    for (const auto& p : cloud.points) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
  }
  const Point3 shift{std::floor(lo.x), std::floor(lo.y), std::floor(lo.z)};
  const Point3 span = hi - shift;
  if (std::max({span.x, span.y, span.z}) / kScale > std::numeric_limits<std::int32_t>::max()) {
    throw InvalidArgument("encode_las: cloud extent too large for 0.1 mm integer coordinates");
  }

  ByteWriter w;
  w.write_bytes("LASF");
  w.write<std::uint16_t>(0);  // file source id
  w.write<std::uint16_t>(0x10);  // global encoding: WKT bit
  w.write_fixed("", 16);
  w.write<std::uint8_t>(1);
  w.write<std::uint8_t>(4);
  w.write_fixed("treeseg", 32);
  w.write_fixed("treeseg", 32);
  w.write<std::uint16_t>(1);
  w.write<std::uint16_t>(2026);
  w.write<std::uint16_t>(kHeaderSize);
  w.write<std::uint32_t>(kHeaderSize + kVlrSize);
  w.write<std::uint32_t>(1);
  w.write<std::uint8_t>(6);
  w.write<std::uint16_t>(kRecordLen);
  w.write<std::uint32_t>(0);  // legacy count (0 for format >= 6)
  for (int i = 0; i < 5; ++i) w.write<std::uint32_t>(0);
  for (int i = 0; i < 3; ++i) w.write(kScale);
  w.write(shift.x);
  w.write(shift.y);
  w.write(shift.z);
  w.write(hi.x);
  w.write(lo.x);
  w.write(hi.y);
  w.write(lo.y);
  w.write(hi.z);
  w.write(lo.z);
  w.write<std::uint64_t>(0);  // waveform
  w.write<std::uint64_t>(0);  // first EVLR
  w.write<std::uint32_t>(0);
  w.write<std::uint64_t>(cloud.size());
  for (int i = 0; i < 15; ++i) w.write<std::uint64_t>(i == 0 ? cloud.size() : 0);

  // Extra-bytes VLR with one u32 "treeID" descriptor.
  w.write<std::uint16_t>(0);
  w.write_fixed("LASF_Spec", 16);
  w.write<std::uint16_t>(4);
  w.write<std::uint16_t>(192);
  w.write_fixed("extra bytes", 32);
  w.write<std::uint16_t>(0);
  w.write<std::uint8_t>(5);  // u32
  w.write<std::uint8_t>(0);
  w.write_fixed("treeID", 32);
  w.write_fixed("", 4 + 24 * 5);
  w.write_fixed("tree instance id, 0 = non-tree", 32);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    w.write(static_cast<std::int32_t>(std::llround((p.x - shift.x) / kScale)));
    w.write(static_cast<std::int32_t>(std::llround((p.y - shift.y) / kScale)));
    w.write(static_cast<std::int32_t>(std::llround((p.z - shift.z) / kScale)));
    w.write<std::uint16_t>(0);  // intensity
    w.write<std::uint8_t>(0x11);  // return 1 of 1
    w.write<std::uint8_t>(0);
    std::uint8_t cls = 1;  // unclassified, annotated
    std::uint32_t tree_id = 0;
    if (cloud.labels) {
      const auto& l = (*cloud.labels)[i];
      if (!l.is_annotated()) cls = 0;
      tree_id = l.tree_id();
    }
    w.write<std::uint8_t>(cls);
    w.write<std::uint8_t>(0);
    w.write<std::int16_t>(0);
    w.write<std::uint16_t>(0);
    w.write<double>(0.0);
    w.write<std::uint32_t>(tree_id);
  }
  return w.take();
}

// ---------------------------------------------------------------------------- files

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  const auto bytes = read_file_bytes(path);
  try {
    switch (format) {
      case CloudFormat::Text:
        return parse_text_cloud(
            std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      case CloudFormat::Binary:
        return decode_binary_cloud(bytes);
      case CloudFormat::Las:
        return decode_las(bytes);
    }
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
  throw InvalidArgument("unknown cloud format");
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::Text: {
      const std::string text = format_text_cloud(cloud);
      write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      return;
    }
    case CloudFormat::Binary:
      write_file_bytes(path, encode_binary_cloud(cloud));
      return;
    case CloudFormat::Las:
      write_file_bytes(path, encode_las(cloud));
      return;
  }
}

}  // namespace treeseg
