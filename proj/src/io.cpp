#include "treegraph/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

namespace treegraph {
namespace {

constexpr std::size_t kRecordBytes = 8 * 3 + 4 + 1 + 4;  // x,y,z,tree_id,class,source_id

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& msg) {
  throw Error(path.string() + ": " + msg);
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line,
                            const std::string& msg) {
  fail(path, "line " + std::to_string(line) + ": " + msg);
}

void check_record(const PointRecord& r, bool has_tree, bool has_class,
                  const std::filesystem::path& path, std::size_t line) {
  if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.z)) {
    fail_line(path, line, "non-finite coordinate");
  }
  if (has_tree && has_class) {
    const bool ground_id = r.tree_id == kGroundTreeId;
    const bool ground_class = r.matter == MatterClass::ground;
    if (ground_id != ground_class) {
      fail_line(path, line, "tree_id 0 and ground class must coincide");
    }
  }
}

bool parse_double(std::string_view s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  // from_chars rejects leading '+' and whitespace; allow a leading '+'.
  if (b != e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::size_t split_fields(std::string_view line, std::array<std::string_view, 8>& out) {
  std::size_t n = 0;
  while (true) {
    const std::size_t comma = line.find(',');
    const std::string_view field = trim(line.substr(0, comma));
    if (n == out.size()) return out.size() + 1;  // too many columns
    out[n++] = field;
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return n;
}

PointCloud read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open for reading");
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  int ncols = -1;  // column count fixed by the first data row
  bool saw_header = false;
  std::array<std::string_view, 8> fields;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const std::size_t nf = split_fields(stripped, fields);
    double x = 0.0;
    if (!saw_header && cloud.empty() && !fields[0].empty() && !parse_double(fields[0], x)) {
      // Optional single header row; anything non-numeric in column 1 qualifies.
      saw_header = true;
      continue;
    }
    if (nf < 3 || nf > 6) fail_line(path, line_no, "expected 3 to 6 columns");
    if (ncols < 0) {
      ncols = static_cast<int>(nf);
    } else if (static_cast<int>(nf) != ncols) {
      fail_line(path, line_no, "inconsistent column count");
    }
    PointRecord r;
    if (!parse_double(fields[0], r.x) || !parse_double(fields[1], r.y) ||
        !parse_double(fields[2], r.z)) {
      fail_line(path, line_no, "malformed coordinate");
    }
    std::int64_t v = 0;
    if (nf >= 4) {
      if (!parse_int(fields[3], v)) fail_line(path, line_no, "malformed tree_id");
      r.tree_id = static_cast<std::int32_t>(v);
    }
    if (nf >= 5) {
      if (!parse_int(fields[4], v) || !valid_matter_class(static_cast<std::uint32_t>(v))) {
        fail_line(path, line_no, "malformed class (expected 0, 1, 2 or 255)");
      }
      r.matter = static_cast<MatterClass>(v);
    }
    if (nf >= 6) {
      if (!parse_int(fields[5], v)) fail_line(path, line_no, "malformed source_id");
      r.source_id = static_cast<std::int32_t>(v);
    }
    check_record(r, nf >= 4, nf >= 5, path, line_no);
    cloud.points.push_back(r);
  }
  if (ncols >= 4) cloud.has_tree_ids = true;
  if (ncols >= 5) cloud.has_classes = true;
  if (ncols >= 6) cloud.has_source_ids = true;
  return cloud;
}

void append_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_f64(std::string& buf, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  append_u32(buf, static_cast<std::uint32_t>(bits & 0xffffffffull));
  append_u32(buf, static_cast<std::uint32_t>(bits >> 32));
}

std::uint32_t take_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

double take_f64(const unsigned char* p) {
  const std::uint64_t bits =
      static_cast<std::uint64_t>(take_u32(p)) | (static_cast<std::uint64_t>(take_u32(p + 4)) << 32);
  return std::bit_cast<double>(bits);
}

PointCloud read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes < 0) fail(path, "cannot determine size");
  if (static_cast<std::size_t>(bytes) % kRecordBytes != 0) {
    fail(path, "size is not a multiple of the record size (" + std::to_string(kRecordBytes) +
                   " bytes)");
  }
  const std::size_t n = static_cast<std::size_t>(bytes) / kRecordBytes;
  PointCloud cloud;
  cloud.points.resize(n);
  // Binary files always carry the full schema.
  cloud.has_tree_ids = cloud.has_classes = cloud.has_source_ids = true;
  std::vector<unsigned char> buf(kRecordBytes * 4096);
  std::size_t i = 0;
  while (i < n) {
    const std::size_t take = std::min<std::size_t>(4096, n - i);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(take * kRecordBytes));
    if (!in) fail(path, "short read");
    for (std::size_t k = 0; k < take; ++k, ++i) {
      const unsigned char* p = buf.data() + k * kRecordBytes;
      PointRecord& r = cloud.points[i];
      r.x = take_f64(p);
      r.y = take_f64(p + 8);
      r.z = take_f64(p + 16);
      r.tree_id = static_cast<std::int32_t>(take_u32(p + 24));
      const std::uint8_t cls = p[28];
      if (!valid_matter_class(cls)) {
        fail(path, "record " + std::to_string(i + 1) + ": invalid class value " +
                       std::to_string(cls));
      }
      r.matter = static_cast<MatterClass>(cls);
      r.source_id = static_cast<std::int32_t>(take_u32(p + 29));
      check_record(r, true, true, path, i + 1);
    }
  }
  return cloud;
}

void write_csv(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  // Optional columns are prefix-ordered: a later column forces the earlier ones.
  const bool sources = cloud.has_source_ids;
  const bool classes = sources || cloud.has_classes;
  const bool trees = classes || cloud.has_tree_ids;
  out << "x,y,z";
  if (trees) out << ",tree_id";
  if (classes) out << ",class";
  if (sources) out << ",source_id";
  out << '\n';
  std::string row;
  for (const auto& p : cloud.points) {
    row.clear();
    row += format_double(p.x);
    row += ',';
    row += format_double(p.y);
    row += ',';
    row += format_double(p.z);
    if (trees) {
      row += ',';
      row += std::to_string(p.tree_id);
    }
    if (classes) {
      row += ',';
      row += std::to_string(static_cast<unsigned>(p.matter));
    }
    if (sources) {
      row += ',';
      row += std::to_string(p.source_id);
    }
    row += '\n';
    out << row;
  }
  if (!out) fail(path, "write failed");
}

void write_binary(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  std::string buf;
  buf.reserve(kRecordBytes * 4096);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const PointRecord& p = cloud.points[i];
    append_f64(buf, p.x);
    append_f64(buf, p.y);
    append_f64(buf, p.z);
    append_u32(buf, static_cast<std::uint32_t>(p.tree_id));
    buf.push_back(static_cast<char>(static_cast<std::uint8_t>(p.matter)));
    append_u32(buf, static_cast<std::uint32_t>(p.source_id));
    if (buf.size() >= kRecordBytes * 4096) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  if (!buf.empty()) out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(path, "write failed");
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CloudFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".dat") ? CloudFormat::binary : CloudFormat::csv;
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  return format == CloudFormat::csv ? read_csv(path) : read_binary(path);
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  if (format == CloudFormat::csv) {
    write_csv(cloud, path);
  } else {
    write_binary(cloud, path);
  }
}

std::vector<TrunkPoint> read_trunks(const std::filesystem::path& path) {
  const PointCloud cloud = read_cloud(path, CloudFormat::csv);
  if (!cloud.empty() && !cloud.has_tree_ids) fail(path, "trunk file needs a tree_id column");
  std::vector<TrunkPoint> trunks;
  trunks.reserve(cloud.size());
  for (const auto& p : cloud.points) trunks.push_back({p.position(), p.tree_id});
  return trunks;
}

void write_trunks(std::span<const TrunkPoint> trunks, const std::filesystem::path& path) {
  PointCloud cloud;
  cloud.has_tree_ids = true;
  cloud.points.reserve(trunks.size());
  for (const auto& t : trunks) {
    PointRecord r;
    r.x = t.position.x;
    r.y = t.position.y;
    r.z = t.position.z;
    r.tree_id = t.tree_id;
    cloud.points.push_back(r);
  }
  write_cloud(cloud, path, CloudFormat::csv);
}

}  // namespace treegraph
