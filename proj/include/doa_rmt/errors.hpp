#ifndef DOA_RMT_ERRORS_HPP
#define DOA_RMT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace doa {

/// Invalid argument shape, size or domain.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative routine failed to converge or hit a singular system.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace doa

#endif  // DOA_RMT_ERRORS_HPP
