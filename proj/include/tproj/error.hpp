#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tproj {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ResampleMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// The open tokens at some cell do not form an acyclic dependency graph.
class CyclicOpenTokens : public Error {
 public:
  CyclicOpenTokens(std::size_t cell, std::vector<std::size_t> cycle, const std::string& what)
      : Error(what), cell_(cell), cycle_(std::move(cycle)) {}

  std::size_t cell() const noexcept { return cell_; }
  const std::vector<std::size_t>& cycle() const noexcept { return cycle_; }

 private:
  std::size_t cell_;
  std::vector<std::size_t> cycle_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tproj
