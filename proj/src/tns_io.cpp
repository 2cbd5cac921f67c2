#include "sur/tns_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sur/error.hpp"

namespace sur::tns {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode(const Tensor& t) {
    if (t.rank() > 255) fail(ErrorKind::Format, "rank too large for .tns");
    std::vector<std::uint8_t> out;
    out.reserve(6 + 4 * t.rank() + 4 * t.numel());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

Tensor decode(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        fail(ErrorKind::Format, origin + ": bad magic bytes");
    }
    if (bytes[4] != kVersion) {
        fail(ErrorKind::Format, origin + ": unsupported .tns version " + std::to_string(bytes[4]));
    }
    const std::size_t rank = bytes[5];
    if (bytes.size() < 6 + 4 * rank) fail(ErrorKind::Format, origin + ": truncated header");
    Shape shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        shape[i] = get_u32(bytes.data() + 6 + 4 * i);
        if (shape[i] == 0) fail(ErrorKind::Format, origin + ": zero dimension");
    }
    const std::size_t n = shape_numel(shape);
    const std::size_t payload = 6 + 4 * rank;
    if (bytes.size() != payload + 4 * n) {
        fail(ErrorKind::Format, origin + ": payload size " + std::to_string(bytes.size() - payload) +
                                    " does not match shape " + shape_string(shape));
    }
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes.data() + payload + 4 * i)));
    }
    return Tensor(std::move(shape), std::move(data));
}

void write(const std::filesystem::path& path, const Tensor& t) {
    const auto bytes = encode(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

Tensor read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes, path.string());
}

Tensor round_to_f32(const Tensor& t) {
    std::vector<double> data(t.data().begin(), t.data().end());
    for (double& v : data) v = static_cast<double>(static_cast<float>(v));
    return Tensor(t.shape(), std::move(data));
}

}  // namespace sur::tns
