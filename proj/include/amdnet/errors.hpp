#pragma once

#include <stdexcept>
#include <string>

namespace amdnet {

// Malformed caller input: bad shapes, bad arguments, bad CLI usage. CLI exit code 2.
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Unusable data: corrupt or truncated files, non-finite values, fingerprint
// mismatches. CLI exit code 3.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace amdnet
