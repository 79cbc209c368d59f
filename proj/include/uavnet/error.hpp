#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace uavnet {

// Malformed or inconsistent input: bad ids, shape mismatches, schema violations.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A file or config could not be read or parsed. Carries every problem found.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& source, std::vector<std::string> problems)
      : std::runtime_error(format(source, problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

private:
  static std::string format(const std::string& source, const std::vector<std::string>& problems) {
    std::string msg = source + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    return msg;
  }

  std::vector<std::string> problems_;
};

class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

private:
  std::string field_;
};

}  // namespace uavnet
