#include "segdet/error.hpp"

namespace segdet {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::BadRle: return "BadRle";
    case ErrorCode::DegenerateNormalizer: return "DegenerateNormalizer";
    case ErrorCode::NoSegments: return "NoSegments";
    case ErrorCode::MissingFeatures: return "MissingFeatures";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::APUndefined: return "APUndefined";
    case ErrorCode::Diverged: return "Diverged";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::Diverged || code == ErrorCode::DegenerateNormalizer ||
         code == ErrorCode::InsufficientPairs;
}

namespace {
std::string where(const std::string& file, std::size_t line, std::size_t byte_offset) {
  if (line > 0) return file + ":" + std::to_string(line);
  return file + "@byte " + std::to_string(byte_offset);
}
}  // namespace

FormatError::FormatError(const std::string& file, std::size_t line, std::size_t byte_offset,
                         const std::string& message)
    : Error(ErrorCode::BadFormat, where(file, line, byte_offset) + ": " + message),
      file_(file),
      line_(line),
      byte_offset_(byte_offset) {}

}  // namespace segdet
