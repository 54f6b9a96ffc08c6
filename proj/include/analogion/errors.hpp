#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace analogion {

/// Base for every error raised by the library. The CLI maps UserError
/// subclasses to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or configuration supplied by the caller.
class UserError : public Error {
 public:
  using Error::Error;
};

class ParseError : public UserError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : UserError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public UserError {
 public:
  using UserError::UserError;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

/// Word absent from a static table that has no subword section.
class MissingWordError : public UserError {
 public:
  explicit MissingWordError(const std::string& word)
      : UserError("word not in vocabulary: '" + word + "'"), word_(word) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

/// A word produced no tokens, so no span can be pooled.
class AlignmentError : public UserError {
 public:
  using UserError::UserError;
};

/// Negative sampling could not find an admissible draw.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace analogion

namespace analogion {

/// Encoded sequence longer than the backend accepts. Never truncated silently.
class SequenceTooLongError : public UserError {
 public:
  using UserError::UserError;
};

}  // namespace analogion
