#include "moodtag/error.hpp"

namespace moodtag {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::LexiconEmpty: return "LexiconEmpty";
    case Errc::EmptyVocabulary: return "EmptyVocabulary";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::ConfigInfeasible: return "ConfigInfeasible";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::DuplicateEntry: return "DuplicateEntry";
    case Errc::EmptyContext: return "EmptyContext";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::UnknownWord: return "UnknownWord";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::InputTooShort: return "InputTooShort";
    case Errc::DegenerateBatch: return "DegenerateBatch";
    case Errc::StaleCache: return "StaleCache";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::SchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

namespace {
std::string decorate(Errc code, const std::string& what, std::size_t line) {
  std::string msg(errc_name(code));
  if (line > 0) msg += " (line " + std::to_string(line) + ")";
  if (!what.empty()) msg += ": " + what;
  return msg;
}
}  // namespace

Error::Error(Errc code, const std::string& what, std::size_t line)
    : std::runtime_error(decorate(code, what, line)), code_(code), line_(line) {}

void fail(Errc code, const std::string& what, std::size_t line) {
  throw Error(code, what, line);
}

}  // namespace moodtag
