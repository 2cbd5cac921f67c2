#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sur/json_io.hpp"
#include "sur/tensor.hpp"

namespace sur {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Writes each tensor to `<dir>/<name>.tns` and returns {name: sha256} for the manifest.
Json write_weight_files(const std::filesystem::path& dir, const NamedTensors& tensors);

// Reads `<dir>/<name>.tns`, verifying its sha256 against the manifest's file table.
Tensor read_weight_file(const std::filesystem::path& dir, const Json& file_table, const std::string& name);

// Gaussian tensor drawn from a stream keyed by (seed, name), rounded through f32 so the
// in-memory value equals what a .tns round trip yields.
Tensor seeded_normal(Shape shape, double stddev, std::uint64_t seed, std::string_view name);

// Kaiming (He) normal init: stddev = sqrt(2 / fan_in).
Tensor kaiming_normal(Shape shape, std::size_t fan_in, std::uint64_t seed, std::string_view name);

std::uint64_t fnv1a(std::string_view text);

// Validates manifest["format_version"] == expected.
void check_format_version(const Json& manifest, int expected, const std::string& origin);

}  // namespace sur
