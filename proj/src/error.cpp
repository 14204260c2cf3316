#include "gensim/error.hpp"

namespace gensim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::format: return "format";
    case ErrorKind::backend: return "backend";
    case ErrorKind::transport: return "transport";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

namespace {

std::string join_field_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid config";
  for (std::size_t i = 0; i < errors.size(); ++i) {
    out += i == 0 ? ": " : "; ";
    out += errors[i];
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> field_errors)
    : ValidationError(join_field_errors(field_errors)), field_errors_(std::move(field_errors)) {}

}  // namespace gensim
