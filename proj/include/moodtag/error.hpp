#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace moodtag {

enum class Errc {
  InvalidArgument,
  Io,
  ParseError,
  UnknownLabel,
  LexiconEmpty,
  EmptyVocabulary,
  ClassTooSmall,
  ConfigInfeasible,
  EmptyCorpus,
  DuplicateEntry,
  EmptyContext,
  ZeroVector,
  UnknownWord,
  DimensionMismatch,
  SingleClassInput,
  InputTooShort,
  DegenerateBatch,
  StaleCache,
  EmptyDataset,
  NonFiniteLoss,
  LengthMismatch,
  EmptyMatrix,
  UnknownClass,
  SchemaMismatch,
};

std::string_view errc_name(Errc code);

/// Every failure raised by the library. `line()` is the 1-based line of the
/// offending input for parse errors, 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::size_t line = 0);

  Errc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Errc code_;
  std::size_t line_;
};

[[noreturn]] void fail(Errc code, const std::string& what, std::size_t line = 0);

}  // namespace moodtag
