#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spdcas {

// Bad caller input: out-of-range parameters, unknown names, shape mismatches.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A persisted Q-table failed validation. `field` names the section that failed.
class CorruptTable : public std::runtime_error {
 public:
  CorruptTable(std::string field, std::size_t offset, const std::string& what)
      : std::runtime_error("corrupt table: " + field + " at byte " + std::to_string(offset) + ": " + what),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string field_;
  std::size_t offset_;
};

// Value iteration produced a non-finite value.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(std::size_t stage, std::size_t vertex, const std::string& what)
      : std::runtime_error("solver failure at stage " + std::to_string(stage) + ", vertex " +
                           std::to_string(vertex) + ": " + what),
        stage_(stage),
        vertex_(vertex) {}

  std::size_t stage() const noexcept { return stage_; }
  std::size_t vertex() const noexcept { return vertex_; }

 private:
  std::size_t stage_;
  std::size_t vertex_;
};

// Malformed line in a JSON-lines or CSV artifact. Lines are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Ratio with a zero denominator.
class UndefinedRatio : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace spdcas
