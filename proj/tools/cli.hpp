#pragma once

// Command-line front end: trajgen, synth, simulate, compare and plot.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdpr/simulator.hpp"
#include "cdpr/trajectory.hpp"

namespace cdpr::cli {

enum ExitCode : int {
  kOk = 0,
  kIoFailure = 1,
  kUsage = 2,
  kNotConverged = 3,
  kNumericalFailure = 4,
};

/// Runs one command; args excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Rectangle of size `size` centered on the frame centroid.
Rect center_window(const RobotParams& params, const Vec2& size);

/// Rows theta, x, y, dtheta, dx, dy; one RMSD column per log.
std::string compare_report(const std::vector<std::string>& names,
                           const std::vector<Vec6>& rmsd);

/// Reference and realized x-y paths plus theta, x, y error traces.
std::string render_svg(const SimLog& log, const Trajectory& reference);

}  // namespace cdpr::cli
