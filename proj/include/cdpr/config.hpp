#pragma once

// Flat "section.key = value" configuration covering robot, weights,
// baseline, noise and rates. Unknown keys are errors; angle entries accept a
// "deg" suffix.

#include <string>

#include "cdpr/controllers.hpp"
#include "cdpr/model.hpp"
#include "cdpr/simulator.hpp"
#include "cdpr/synthesis.hpp"

namespace cdpr {

/// LQG weights as written in the file: cost diagonals and standard
/// deviations, squared into covariances by build().
struct WeightsConfig {
  Vec6 Q_diag;
  Vec4 R_diag;
  Vec6 sigma0_std;
  Vec8 meas_std;
  Vec4 torque_std;

  static WeightsConfig defaults();
  LqgWeights build() const;
};

struct Config {
  RobotParams robot = RobotParams::defaults();
  WeightsConfig weights = WeightsConfig::defaults();
  BaselineGains baseline;
  NoiseConfig noise = NoiseConfig::defaults();
  double offline_hz = 100;
  double ctrl_hz = 1000;
  int substeps = 10;
  Decimation decimation = Decimation::Mean;

  static Config defaults() { return {}; }
  /// Re-runs every module-level validation; errors name the key.
  void validate() const;
  Rates rates() const { return {ctrl_hz, substeps}; }
};

/// Keys not present keep their defaults. Throws FormatError naming the line
/// for syntax errors, unknown or repeated keys; Error from validate().
Config parse_config(const std::string& text, const std::string& source = "<config>");
Config load_config(const std::string& path);

/// Every key, SI units (angles in radians), round-trip exact.
std::string serialize_config(const Config& config);
void save_config(const std::string& path, const Config& config);

}  // namespace cdpr
