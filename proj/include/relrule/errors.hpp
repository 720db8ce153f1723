// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace relrule {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VocabError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class GenerationError : public Error { using Error::Error; };
class MemoryExhausted : public Error { using Error::Error; };
class InternalError : public Error { using Error::Error; };
class IllegalAction : public Error { using Error::Error; };
class InvalidEpisode : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ContractViolation : public Error { using Error::Error; };
class ExplainUnavailable : public Error { using Error::Error; };

}  // namespace relrule
