#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace srpose {

// Malformed input file. `offset` is the byte position reported by the JSON
// reader, or 0 when the failure is not positional.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Well-formed input that breaks a data invariant. Carries the ids of the
// offending annotations (or records) when known.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what,
                           std::vector<std::int64_t> ids = {})
      : std::runtime_error(what), ids_(std::move(ids)) {}
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::int64_t> ids_;
};

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Image/heatmap shape disagreement between two operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pose backend (super-resolver, detector, keypoint estimator) failed.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace srpose
