#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sur {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

Json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; key order is sorted, so output is stable.
void write_json(const std::filesystem::path& path, const Json& doc);
void write_json(const std::filesystem::path& path, const OrderedJson& doc);

void ensure_directory(const std::filesystem::path& dir);

// Config error naming "<context>.<key>" for the first key not in `allowed`.
// Also rejects non-object documents.
void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& context);

// Reads j[key] as T when present; a type error becomes a config error naming the field.
template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& context);

[[noreturn]] void config_type_error(const std::string& field, const std::string& detail);

template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const Json::exception& e) {
        config_type_error(context.empty() ? key : context + "." + key, e.what());
    }
}

}  // namespace sur
