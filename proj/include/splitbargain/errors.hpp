#pragma once

#include <stdexcept>
#include <string>

namespace splitbargain {

/// Invariant or precondition violation; the message names the offending field.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (config or IDX); the message carries line/offset context.
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Device placed exactly on top of the server (distance 0).
class degenerate_geometry_error : public std::runtime_error {
 public:
  explicit degenerate_geometry_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Upload at rate 0: latency is unbounded and must not leak into utilities as inf.
class infinite_latency_error : public std::runtime_error {
 public:
  explicit infinite_latency_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bargaining problem outside the solvable domain (e.g. non-positive ideal utility).
class bargaining_domain_error : public std::runtime_error {
 public:
  explicit bargaining_domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// The bisection found no feasible scaling at all.
class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace splitbargain
