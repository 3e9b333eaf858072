#include "wavefuse/kitti_io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "wavefuse/error.hpp"

namespace wavefuse {

namespace {

float load_le_float(const std::byte* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | std::to_integer<std::uint32_t>(p[i]);
  return std::bit_cast<float>(bits);
}

void store_le_float(float value, std::byte* p) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) {
    p[i] = static_cast<std::byte>(bits & 0xFFu);
    bits >>= 8;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_value(double v) {
  std::ostringstream out;
  out << std::setprecision(12) << v;
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// velodyne .bin

RawPointCloud read_velodyne_bin(std::span<const std::byte> bytes) {
  if (bytes.size() % 16 != 0) {
    throw FormatError("velodyne bin: byte length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16");
  }
  RawPointCloud cloud;
  cloud.points.reserve(bytes.size() / 16);
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    const std::byte* p = bytes.data() + off;
    LidarPoint pt{load_le_float(p), load_le_float(p + 4), load_le_float(p + 8), load_le_float(p + 12)};
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z)) {
      throw FormatError("velodyne bin: non-finite coordinate in point " + std::to_string(off / 16));
    }
    cloud.points.push_back(pt);
  }
  return cloud;
}

std::vector<std::byte> write_velodyne_bin(const RawPointCloud& cloud) {
  std::vector<std::byte> bytes(cloud.points.size() * 16);
  std::byte* p = bytes.data();
  for (const auto& pt : cloud.points) {
    store_le_float(static_cast<float>(pt.x), p);
    store_le_float(static_cast<float>(pt.y), p + 4);
    store_le_float(static_cast<float>(pt.z), p + 8);
    store_le_float(static_cast<float>(pt.intensity), p + 12);
    p += 16;
  }
  return bytes;
}

// ---------------------------------------------------------------------------
// calib .txt

CalibrationSet parse_calib(std::string_view text) {
  std::optional<std::vector<double>> p2, r0, tr;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto colon = lines[li].find(':');
    if (colon == std::string_view::npos) continue;
    const auto key = lines[li].substr(0, colon);
    std::optional<std::vector<double>>* slot = nullptr;
    std::size_t expected = 0;
    if (key == "P2") {
      slot = &p2;
      expected = 12;
    } else if (key == "R0_rect") {
      slot = &r0;
      expected = 9;
    } else if (key == "Tr_velo_to_cam") {
      slot = &tr;
      expected = 12;
    } else {
      continue;
    }
    std::vector<double> values;
    for (auto tok : split_ws(lines[li].substr(colon + 1))) {
      double v = 0.0;
      if (!parse_double(tok, v)) {
        throw FormatError("calib line " + std::to_string(li + 1) + ": bad number '" +
                          std::string(tok) + "'");
      }
      values.push_back(v);
    }
    if (values.size() != expected) {
      throw FormatError("calib line " + std::to_string(li + 1) + ": " + std::string(key) +
                        " has " + std::to_string(values.size()) + " values, expected " +
                        std::to_string(expected));
    }
    *slot = std::move(values);
  }
  if (!p2) throw FormatError("calib: missing P2");
  if (!r0) throw FormatError("calib: missing R0_rect");
  if (!tr) throw FormatError("calib: missing Tr_velo_to_cam");

  CalibrationSet calib;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      calib.p2[r][c] = (*p2)[r * 4 + c];
      calib.tr_velo_to_cam[r][c] = (*tr)[r * 4 + c];
    }
    for (int c = 0; c < 3; ++c) calib.r0_rect[r][c] = (*r0)[r * 3 + c];
  }
  return calib;
}

std::string format_calib(const CalibrationSet& calib) {
  std::ostringstream out;
  out << "P2:";
  for (const auto& row : calib.p2)
    for (double v : row) out << ' ' << format_value(v);
  out << "\nR0_rect:";
  for (const auto& row : calib.r0_rect)
    for (double v : row) out << ' ' << format_value(v);
  out << "\nTr_velo_to_cam:";
  for (const auto& row : calib.tr_velo_to_cam)
    for (double v : row) out << ' ' << format_value(v);
  out << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// label .txt

std::vector<LabelRecord> parse_labels(std::string_view text, LabelParseOptions options) {
  std::vector<LabelRecord> records;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto fields = split_ws(lines[li]);
    if (fields.empty()) continue;
    const std::string where = "label line " + std::to_string(li + 1);
    if (fields.size() != 15 && fields.size() != 16) {
      throw FormatError(where + ": expected 15 or 16 fields, got " + std::to_string(fields.size()));
    }
    double v[15] = {};
    for (std::size_t f = 1; f < fields.size(); ++f) {
      if (!parse_double(fields[f], v[f - 1])) {
        throw FormatError(where + ": field " + std::to_string(f + 1) + " is not a number: '" +
                          std::string(fields[f]) + "'");
      }
    }
    LabelRecord rec;
    rec.type = std::string(fields[0]);
    rec.truncation = v[0];
    rec.occlusion = static_cast<int>(std::lround(v[1]));
    rec.alpha = v[2];
    rec.bbox = {v[3], v[4], v[5], v[6]};
    rec.dimensions = {v[7], v[8], v[9]};
    rec.location = {v[10], v[11], v[12]};
    rec.rotation_y = v[13];
    if (fields.size() == 16) rec.score = v[14];

    if (rec.dont_care()) {
      if (!options.keep_dont_care) continue;
    } else {
      if (rec.bbox[0] > rec.bbox[2] || rec.bbox[1] > rec.bbox[3]) {
        throw FormatError(where + ": bbox corners out of order");
      }
      if (rec.dimensions[0] <= 0 || rec.dimensions[1] <= 0 || rec.dimensions[2] <= 0) {
        throw FormatError(where + ": box dimensions must be positive");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string format_labels(std::span<const LabelRecord> labels) {
  std::ostringstream out;
  for (const auto& r : labels) {
    out << r.type << ' ' << format_value(r.truncation) << ' ' << r.occlusion << ' '
        << format_value(r.alpha);
    for (double v : r.bbox) out << ' ' << format_value(v);
    for (double v : r.dimensions) out << ' ' << format_value(v);
    for (double v : r.location) out << ' ' << format_value(v);
    out << ' ' << format_value(r.rotation_y);
    if (r.score) out << ' ' << format_value(*r.score);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// files

std::vector<std::byte> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::string& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void write_file_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace wavefuse
