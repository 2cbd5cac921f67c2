#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sur/tensor.hpp"

namespace sur::tns {

inline constexpr char kMagic[4] = {'S', 'U', 'R', 'T'};
inline constexpr std::uint8_t kVersion = 1;

// Layout: "SURT", u8 version, u8 rank, rank x u32le dims, numel x f32le values.
// Values are narrowed to f32 on write and promoted back to f64 on read.
std::vector<std::uint8_t> encode(const Tensor& t);
Tensor decode(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void write(const std::filesystem::path& path, const Tensor& t);
Tensor read(const std::filesystem::path& path);

// Round every element through f32, i.e. the value a write/read cycle yields.
Tensor round_to_f32(const Tensor& t);

}  // namespace sur::tns
