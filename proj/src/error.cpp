#include "cuskip/error.hpp"

namespace cuskip {

ParseError::ParseError(std::string source, std::size_t line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message),
      source_(std::move(source)),
      line_(line) {}

}  // namespace cuskip
