#include "wavefuse/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "wavefuse/error.hpp"
#include "wavefuse/kitti_io.hpp"

namespace wavefuse {

namespace {

static_assert(std::endian::native == std::endian::little, "feature dumps assume a little-endian host");

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  // Whitespace and '#' comments may separate header tokens.
  std::size_t number(const char* what) {
    skip_space();
    std::size_t value = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(ch())) {
      value = value * 10 + static_cast<std::size_t>(ch() - '0');
      if (value > (1u << 24)) throw FormatError(std::string("ppm: ") + what + " too large");
      any = true;
      ++pos_;
    }
    if (!any) throw FormatError(std::string("ppm: expected ") + what);
    return value;
  }

  std::string token(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("ppm: truncated header");
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return out;
  }

  // Exactly one whitespace byte ends the header.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(ch())) throw FormatError("ppm: malformed header");
    ++pos_;
  }

  std::size_t position() const { return pos_; }

 private:
  unsigned char ch() const { return static_cast<unsigned char>(bytes_[pos_]); }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(ch())) {
        ++pos_;
      } else if (ch() == '#') {
        while (pos_ < bytes_.size() && ch() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

Tensor decode_ppm(std::span<const std::byte> bytes) {
  HeaderReader in(bytes);
  if (in.token(2) != "P6") throw FormatError("ppm: not a binary P6 file");
  const std::size_t width = in.number("width");
  const std::size_t height = in.number("height");
  const std::size_t maxval = in.number("maxval");
  if (maxval != 255) throw FormatError("ppm: only maxval 255 is supported");
  in.end_of_header();
  const std::size_t need = width * height * 3;
  if (bytes.size() - in.position() < need) throw FormatError("ppm: truncated pixel data");
  Tensor img({height, width, 3});
  const auto* px = bytes.data() + in.position();
  for (std::size_t i = 0; i < need; ++i) img[i] = static_cast<double>(std::to_integer<unsigned>(px[i]));
  return img;
}

std::vector<std::byte> encode_ppm(const Tensor& image) {
  require_rank(image, 3, "encode_ppm");
  if (image.channels() != 3) throw ShapeError("encode_ppm: expected 3 channels, got " + shape_string(image.dims()));
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::byte> out(header.size() + image.size());
  std::memcpy(out.data(), header.data(), header.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(std::round(image[i]), 0.0, 255.0);
    out[header.size() + i] = static_cast<std::byte>(static_cast<unsigned>(v));
  }
  return out;
}

Tensor read_ppm(const std::string& path) {
  try {
    return decode_ppm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_ppm(const std::string& path, const Tensor& image) { write_file_bytes(path, encode_ppm(image)); }

std::vector<std::byte> encode_feature_dump(const Tensor& map) {
  require_rank(map, 3, "encode_feature_dump");
  std::vector<std::byte> out;
  out.reserve(16 + 4 * map.size());
  for (char c : kFeatureMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, static_cast<std::uint32_t>(map.height()));
  put_u32(out, static_cast<std::uint32_t>(map.width()));
  put_u32(out, static_cast<std::uint32_t>(map.channels()));
  for (double v : map.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_feature_dump(std::span<const std::byte> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
    throw FormatError("feature dump: bad magic");
  }
  const std::size_t h = get_u32(bytes, 4), w = get_u32(bytes, 8), c = get_u32(bytes, 12);
  if (bytes.size() != 16 + 4 * h * w * c) throw FormatError("feature dump: size does not match header");
  Tensor map({h, w, c});
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  return map;
}

}  // namespace wavefuse
