#pragma once

#include <stdexcept>
#include <string>

namespace spikegrasp {

// Failure categories surfaced by the pipeline. Input-class errors map to
// CLI exit code 2, everything else to 3.
enum class errc {
  precondition,
  placement_failure,
  saturation,
  out_of_range,
  shape_mismatch,
  empty_seeds,
  empty_region,
  no_contact,
  domain,
  division_by_zero,
  divergence,
  io,
  config,
};

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  errc kind() const { return kind_; }

  bool is_input_error() const {
    switch (kind_) {
      case errc::precondition:
      case errc::out_of_range:
      case errc::io:
      case errc::config:
        return true;
      default:
        return false;
    }
  }

 private:
  errc kind_;
};

[[noreturn]] inline void fail(errc kind, const std::string& what) {
  throw error(kind, what);
}

inline void require(bool cond, errc kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace spikegrasp
