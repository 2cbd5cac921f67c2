#pragma once

#include <stdexcept>
#include <string>

namespace sur {

// Every failure the library reports derives from Error; the kind tells the CLI
// which exit code to use and lets tests assert on the failure category.
enum class ErrorKind {
    Dimension,
    Numeric,
    Contract,
    Tape,
    Range,
    EmptyInput,
    Vocabulary,
    Config,
    Data,
    Format,
    Io,
    Statistics,
    Parameter,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace sur
