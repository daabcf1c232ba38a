#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvavg {

/// Inputs that violate a structural invariant (dimension mismatch, bad range).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested operation exists but not for this kind of input.
class UnsupportedCase : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or inconsistent configuration. `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// A particle state became NaN or infinite.
class BlowUp : public std::runtime_error {
 public:
  BlowUp(double time, std::size_t particle, const std::string& context = {})
      : std::runtime_error(make_message(time, particle, context)),
        time_(time),
        particle_(particle) {}

  double time() const noexcept { return time_; }
  std::size_t particle() const noexcept { return particle_; }

 private:
  static std::string make_message(double time, std::size_t particle, const std::string& context) {
    std::string msg = "non-finite state at t=" + std::to_string(time) + " in particle " +
                      std::to_string(particle) +
                      "; try a smaller micro step or the semi-implicit fast scheme";
    if (!context.empty()) msg += " [" + context + "]";
    return msg;
  }

  double time_;
  std::size_t particle_;
};

}  // namespace mvavg
