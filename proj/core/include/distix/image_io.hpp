#pragma once

// Frame and flow interchange: 8-bit PNG, binary PPM/PGM and Middlebury .flo.
// In-memory variants exist for the HTTP service.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "distix/imaging.hpp"

namespace distix {

using Bytes = std::vector<std::uint8_t>;

// Detects PNG / PPM (P6) / PGM (P5) by magic bytes. Values map [0,255] -> [0,1].
Frame decode_image(std::span<const std::uint8_t> bytes);
Frame load_frame(const std::filesystem::path& path);

Bytes encode_png(const Frame& frame);
// Format chosen by extension: .png, .ppm (P6), .pgm (P5, gray frames only).
void save_frame(const Frame& frame, const std::filesystem::path& path);

// Nearest 8-bit code of a [0,1] value.
std::uint8_t quantize_u8(double value);

inline constexpr float kFloMagic = 202021.25f;

FlowField decode_flo(std::span<const std::uint8_t> bytes);
Bytes encode_flo(const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& flow, const std::filesystem::path& path);

bool looks_like_png(std::span<const std::uint8_t> bytes);
bool looks_like_pnm(std::span<const std::uint8_t> bytes);
bool looks_like_flo(std::span<const std::uint8_t> bytes);

Bytes read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Little-endian scalar packing shared by the binary formats.
namespace le {
void put_f32(Bytes& out, float value);
void put_i32(Bytes& out, std::int32_t value);
float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset);
std::int32_t get_i32(std::span<const std::uint8_t> bytes, std::size_t offset);
}  // namespace le

}  // namespace distix
