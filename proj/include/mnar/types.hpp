#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mnar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// Error hierarchy. `module()` names the component that raised the error so
// front ends can report provenance.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Inconsistent dimensions or malformed structural input.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure could not produce a valid answer.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Reading or writing files.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class Mechanism { MAR, UNI };

inline const char* to_string(Mechanism m) { return m == Mechanism::MAR ? "MAR" : "UNI"; }

inline Mechanism mechanism_from_string(const std::string& s) {
  if (s == "MAR" || s == "mar") return Mechanism::MAR;
  if (s == "UNI" || s == "uni") return Mechanism::UNI;
  throw ConfigError("config", "unknown missingness mechanism '" + s + "'");
}

}  // namespace mnar
