#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace forecast {

/// Malformed input data (CSV rows, manifests, config files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trainer produced a NaN or infinity. `quantity()` names the first offending value.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string quantity, long step)
      : std::runtime_error("non-finite " + quantity + " at step " + std::to_string(step)),
        quantity_(std::move(quantity)),
        step_(step) {}

  const std::string& quantity() const { return quantity_; }
  long step() const { return step_; }

 private:
  std::string quantity_;
  long step_;
};

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the warning sink (stderr by default). Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace forecast
