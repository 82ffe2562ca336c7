#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctc {

// Base for every error the library raises on bad input or impossible requests.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: bad JSONL, invalid records, duplicate keys.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  // 1-based line number, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MalformedPathError : public DataError {
 public:
  MalformedPathError(const std::string& what, std::size_t segment)
      : DataError("malformed category path (segment " +
                  std::to_string(segment) + "): " + what),
        segment_(segment) {}

  // 1-based index of the offending segment.
  std::size_t segment() const noexcept { return segment_; }

 private:
  std::size_t segment_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  enum class Kind { kEmptyData, kDegenerate, kNonFinite };

  TrainingError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A metric that is undefined for its inputs (empty pair list, zero baseline).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctc
