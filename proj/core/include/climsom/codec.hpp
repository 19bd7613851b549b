#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace climsom::codec {

std::string base64_encode(std::span<std::uint8_t const> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian float32 blocks, independent of host byte order.
void append_f32le(std::string& out, std::span<float const> values);
std::vector<float> parse_f32le(std::string_view bytes);

std::string read_file(std::filesystem::path const& path);
void write_file(std::filesystem::path const& path, std::string_view bytes);

}  // namespace climsom::codec
