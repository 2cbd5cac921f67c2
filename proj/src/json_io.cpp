#include "sur/json_io.hpp"

#include <fstream>
#include <sstream>

#include "sur/error.hpp"

namespace sur {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

void write_json(const std::filesystem::path& path, const OrderedJson& doc) { write_text(path, doc.dump(2) + "\n"); }

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        fail(ErrorKind::Io, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& context) {
    if (!j.is_object()) fail(ErrorKind::Config, (context.empty() ? "config" : context) + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (auto a : allowed) known = known || a == it.key();
        if (!known) {
            fail(ErrorKind::Config, "unknown key '" + (context.empty() ? it.key() : context + "." + it.key()) + "'");
        }
    }
}

void config_type_error(const std::string& field, const std::string& detail) {
    fail(ErrorKind::Config, "invalid value for '" + field + "': " + detail);
}

}  // namespace sur
