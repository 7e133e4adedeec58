#pragma once

#include <stdexcept>
#include <string>

namespace segdet {

enum class ErrorCode {
  EmptySegment,
  BadRle,
  DegenerateNormalizer,
  NoSegments,
  MissingFeatures,
  BadFormat,
  BadConfig,
  MissingFile,
  InsufficientPairs,
  ProviderError,
  APUndefined,
  Diverged,
};

const char* to_string(ErrorCode code);

/// Numerical failures map to CLI exit code 3; everything else is an input error (exit 2).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/**
 * Parse failure with the offending location. `line` is 1-based for text formats;
 * binary formats report a byte offset and leave line at 0.
 */
class FormatError : public Error {
 public:
  FormatError(const std::string& file, std::size_t line, std::size_t byte_offset,
              const std::string& message);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t byte_offset_;
};

}  // namespace segdet
