#include "distix/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace distix {

namespace {

constexpr int kMaxDimension = 1 << 15;

void check_dimensions(long long width, long long height, const char* what) {
  if (width <= 0 || height <= 0) {
    fail(ErrorKind::Format, std::string(what) + ": nonpositive dimensions");
  }
  if (width > kMaxDimension || height > kMaxDimension) {
    fail(ErrorKind::Format, std::string(what) + ": dimensions exceed " + std::to_string(kMaxDimension));
  }
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

namespace le {

void put_i32(Bytes& out, std::int32_t value) {
  std::uint32_t u = to_le(static_cast<std::uint32_t>(value));
  const auto* p = reinterpret_cast<const std::uint8_t*>(&u);
  out.insert(out.end(), p, p + 4);
}

void put_f32(Bytes& out, float value) { put_i32(out, std::bit_cast<std::int32_t>(value)); }

std::int32_t get_i32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t u;
  std::memcpy(&u, bytes.data() + offset, 4);
  return static_cast<std::int32_t>(to_le(u));
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_i32(bytes, offset));
}

}  // namespace le

std::uint8_t quantize_u8(double value) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
}

Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "failed reading " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

bool looks_like_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

bool looks_like_pnm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6');
}

bool looks_like_flo(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && bytes[0] == 'P' && bytes[1] == 'I' && bytes[2] == 'E' && bytes[3] == 'H';
}

// ---------------------------------------------------------------------------
// PNG

namespace {

Frame decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorKind::Format, std::string("invalid PNG: ") + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    fail(ErrorKind::Format, "unsupported PNG bit depth (only 8-bit images are accepted)");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  const long long w = image.width;
  const long long h = image.height;
  try {
    check_dimensions(w, h, "PNG");
  } catch (...) {
    png_image_free(&image);
    throw;
  }
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    fail(ErrorKind::Format, std::string("PNG decode failed: ") + image.message);
  }
  std::vector<double> data(buffer.size());
  std::transform(buffer.begin(), buffer.end(), data.begin(), [](std::uint8_t v) { return v / 255.0; });
  return Frame(static_cast<int>(h), static_cast<int>(w), channels, std::move(data));
}

std::vector<std::uint8_t> to_u8(const Frame& frame) {
  std::vector<std::uint8_t> out(frame.data().size());
  std::transform(frame.data().begin(), frame.data().end(), out.begin(), quantize_u8);
  return out;
}

png_image png_header(const Frame& frame) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width());
  image.height = static_cast<png_uint_32>(frame.height());
  image.format = frame.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  return image;
}

// ---------------------------------------------------------------------------
// PPM / PGM

struct PnmHeader {
  char kind = 0;
  long long width = 0;
  long long height = 0;
  long long maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes) {
  PnmHeader header;
  header.kind = static_cast<char>(bytes[1]);
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long long {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(ErrorKind::Format, "malformed PNM header");
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1LL << 40)) fail(ErrorKind::Format, "malformed PNM header");
      ++pos;
    }
    return v;
  };
  header.width = read_int();
  header.height = read_int();
  header.maxval = read_int();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(ErrorKind::Format, "malformed PNM header");
  header.data_offset = pos + 1;
  return header;
}

Frame decode_pnm(std::span<const std::uint8_t> bytes) {
  const PnmHeader header = parse_pnm_header(bytes);
  check_dimensions(header.width, header.height, "PNM");
  if (header.maxval != 255) {
    fail(ErrorKind::Format, "unsupported PNM bit depth (maxval " + std::to_string(header.maxval) + ", expected 255)");
  }
  const int channels = header.kind == '6' ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(header.width) * header.height * channels;
  if (bytes.size() < header.data_offset + count) fail(ErrorKind::Format, "truncated PNM payload");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = bytes[header.data_offset + i] / 255.0;
  return Frame(static_cast<int>(header.height), static_cast<int>(header.width), channels, std::move(data));
}

Bytes encode_pnm(const Frame& frame, bool color) {
  const std::string header = std::string(color ? "P6" : "P5") + "\n" + std::to_string(frame.width()) + " " +
                             std::to_string(frame.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      if (color) {
        for (int c = 0; c < 3; ++c) out.push_back(quantize_u8(frame.at(y, x, frame.channels() == 3 ? c : 0)));
      } else {
        out.push_back(quantize_u8(frame.luma(y, x)));
      }
    }
  }
  return out;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Frame decode_image(std::span<const std::uint8_t> bytes) {
  if (looks_like_png(bytes)) return decode_png(bytes);
  if (looks_like_pnm(bytes)) return decode_pnm(bytes);
  fail(ErrorKind::Format, "unrecognized image format (expected PNG or binary PPM/PGM)");
}

Frame load_frame(const std::filesystem::path& path) {
  const Bytes bytes = read_file_bytes(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

Bytes encode_png(const Frame& frame) {
  if (frame.empty()) fail(ErrorKind::InvalidArgument, "cannot encode an empty frame");
  png_image image = png_header(frame);
  const std::vector<std::uint8_t> pixels = to_u8(frame);
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorKind::Format, std::string("PNG encode failed: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorKind::Format, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void save_frame(const Frame& frame, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file_bytes(path, encode_png(frame));
  } else if (ext == ".ppm") {
    write_file_bytes(path, encode_pnm(frame, true));
  } else if (ext == ".pgm") {
    write_file_bytes(path, encode_pnm(frame, false));
  } else {
    fail(ErrorKind::InvalidArgument, "unsupported image extension '" + ext + "' (use .png, .ppm or .pgm)");
  }
}

// ---------------------------------------------------------------------------
// Middlebury .flo: "PIEH" (202021.25f), int32 width, int32 height, then
// interleaved float32 (u, v) rows.

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) fail(ErrorKind::Format, "truncated .flo header");
  if (le::get_f32(bytes, 0) != kFloMagic) fail(ErrorKind::Format, ".flo bad magic (expected 202021.25)");
  const std::int32_t w = le::get_i32(bytes, 4);
  const std::int32_t h = le::get_i32(bytes, 8);
  check_dimensions(w, h, ".flo");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < 12 + n * 8) fail(ErrorKind::Format, "truncated .flo payload");
  FlowField flow(h, w);
  auto dst = flow.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = le::get_f32(bytes, 12 + i * 8);
    const double v = le::get_f32(bytes, 12 + i * 8 + 4);
    if (!std::isfinite(u) || !std::isfinite(v)) fail(ErrorKind::Format, ".flo contains non-finite flow");
    dst[i] = {u, v};
  }
  return flow;
}

Bytes encode_flo(const FlowField& flow) {
  if (flow.empty()) fail(ErrorKind::InvalidArgument, "cannot encode an empty flow field");
  Bytes out;
  out.reserve(12 + flow.data().size() * 8);
  le::put_f32(out, kFloMagic);
  le::put_i32(out, flow.width());
  le::put_i32(out, flow.height());
  for (const Vec2& v : flow.data()) {
    le::put_f32(out, static_cast<float>(v.x));
    le::put_f32(out, static_cast<float>(v.y));
  }
  return out;
}

FlowField read_flo(const std::filesystem::path& path) {
  const Bytes bytes = read_file_bytes(path);
  try {
    return decode_flo(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_flo(const FlowField& flow, const std::filesystem::path& path) { write_file_bytes(path, encode_flo(flow)); }

}  // namespace distix
