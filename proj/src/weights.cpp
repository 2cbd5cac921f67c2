#include "sur/weights.hpp"

#include <cmath>

#include "sur/error.hpp"
#include "sur/hash.hpp"
#include "sur/rng.hpp"
#include "sur/tns_io.hpp"

namespace sur {

Json write_weight_files(const std::filesystem::path& dir, const NamedTensors& tensors) {
    ensure_directory(dir);
    Json table = Json::object();
    for (const auto& [name, tensor] : tensors) {
        const auto bytes = tns::encode(tensor);
        const auto path = dir / (name + ".tns");
        write_text(path, std::string(bytes.begin(), bytes.end()));
        table[name] = sha256_hex(bytes);
    }
    return table;
}

Tensor read_weight_file(const std::filesystem::path& dir, const Json& file_table, const std::string& name) {
    if (!file_table.is_object() || !file_table.contains(name)) {
        fail(ErrorKind::Format, dir.string() + ": manifest has no entry for weight '" + name + "'");
    }
    const auto path = dir / (name + ".tns");
    const std::string text = read_text(path);
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    if (sha256_hex(bytes) != file_table.at(name).get<std::string>()) {
        fail(ErrorKind::Format, path.string() + ": hash verification failed");
    }
    return tns::decode(bytes, path.string());
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

Tensor seeded_normal(Shape shape, double stddev, std::uint64_t seed, std::string_view name) {
    Rng rng(mix_seed(seed, fnv1a(name)));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = static_cast<double>(static_cast<float>(stddev * rng.normal()));
    return Tensor(std::move(shape), std::move(data));
}

Tensor kaiming_normal(Shape shape, std::size_t fan_in, std::uint64_t seed, std::string_view name) {
    return seeded_normal(std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in)), seed, name);
}

void check_format_version(const Json& manifest, int expected, const std::string& origin) {
    if (!manifest.is_object() || !manifest.contains("format_version") ||
        !manifest["format_version"].is_number_integer()) {
        fail(ErrorKind::Format, origin + ": manifest lacks an integer format_version");
    }
    const int got = manifest["format_version"].get<int>();
    if (got != expected) {
        fail(ErrorKind::Format, origin + ": unsupported format_version " + std::to_string(got) + " (expected " +
                                    std::to_string(expected) + ")");
    }
}

}  // namespace sur
