// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dta {

/// Invalid or inconsistent run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numeric invariants at run time. CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SMILES rejection: carries the byte offset and the offending construct.
class SmilesError : public std::runtime_error {
 public:
  SmilesError(size_t offset, const std::string& construct, const std::string& detail)
      : std::runtime_error("SMILES parse error at byte " + std::to_string(offset) + ": " +
                           construct + (detail.empty() ? "" : " (" + detail + ")")),
        offset_(offset),
        construct_(construct) {}

  size_t offset() const { return offset_; }
  const std::string& construct() const { return construct_; }

 private:
  size_t offset_;
  std::string construct_;
};

}  // namespace dta
