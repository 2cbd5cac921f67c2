#include "sur/error.hpp"

namespace sur {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension error";
        case ErrorKind::Numeric: return "numeric error";
        case ErrorKind::Contract: return "contract error";
        case ErrorKind::Tape: return "tape error";
        case ErrorKind::Range: return "range error";
        case ErrorKind::EmptyInput: return "empty-input error";
        case ErrorKind::Vocabulary: return "vocabulary error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Data: return "data error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Io: return "io error";
        case ErrorKind::Statistics: return "statistics error";
        case ErrorKind::Parameter: return "parameter error";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace sur
