#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cdpr/config.hpp"
#include "cdpr/errors.hpp"
#include "cdpr/synthesis.hpp"

namespace cdpr::cli {

namespace {

constexpr const char* kMetricNames[6] = {"theta_deg", "x_mm", "y_mm",
                                         "dtheta_deg_s", "dx_mm_s", "dy_mm_s"};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Vec2 parse_pair(const std::string& text, char sep, const char* flag) {
  const auto pos = text.find(sep);
  if (pos != std::string::npos) {
    try {
      std::size_t n1 = 0, n2 = 0;
      const std::string a = text.substr(0, pos), b = text.substr(pos + 1);
      const double x = std::stod(a, &n1), y = std::stod(b, &n2);
      if (n1 == a.size() && n2 == b.size()) return {x, y};
    } catch (const std::exception&) {
    }
  }
  throw Error(std::string(flag) + ": expected two numbers separated by '" + sep + "', got '" +
              text + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

Config config_or_default(const std::string& path) {
  return path.empty() ? Config::defaults() : load_config(path);
}

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

void print_rmsd(std::ostream& out, const Vec6& m) {
  const char* units[6] = {"deg", "mm", "mm", "deg/s", "mm/s", "mm/s"};
  const char* names[6] = {"theta", "x", "y", "dtheta", "dx", "dy"};
  out << "rmsd:";
  for (int i = 0; i < 6; ++i) out << ' ' << names[i] << '=' << fmt("%.4f", m(i)) << units[i];
  out << '\n';
}

struct MetricFlags {
  double skip = 1.0;
  bool center_only = false;
  std::string center_size = "0.75x0.5";

  void add(CLI::App* cmd) {
    cmd->add_option("--skip", skip, "initial transient excluded from metrics (s)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--center-only", center_only,
                  "only samples whose reference lies in the center window");
    cmd->add_option("--center-size", center_size, "center window WxH (m)");
  }

  std::optional<Rect> window(const RobotParams& params) const {
    if (!center_only) return std::nullopt;
    return center_window(params, parse_pair(center_size, 'x', "--center-size"));
  }
};

// trajgen

struct TrajgenArgs {
  std::string config, area = "1.5x1.0", center, out;
  int rings = 4;
  double vmax = 0.5, amax = 1.0, rate = 100, hold = 1.0;
};

int cmd_trajgen(const TrajgenArgs& a, std::ostream& out) {
  const Config cfg = config_or_default(a.config);
  DiamondOptions opts;
  const Vec2 area = parse_pair(a.area, 'x', "--area");
  opts.area_w = area.x();
  opts.area_h = area.y();
  opts.center = a.center.empty() ? cfg.robot.frame_centroid()
                                 : parse_pair(a.center, ',', "--center");
  opts.n_rings = a.rings;
  opts.vmax = a.vmax;
  opts.amax = a.amax;
  opts.dt = 1.0 / a.rate;
  opts.hold = a.hold;
  const Trajectory traj = diamond_reference(opts);
  save_trajectory(a.out, traj);
  out << "duration " << fmt("%.3f", traj.duration()) << " s, " << traj.samples.size()
      << " samples\n";
  return kOk;
}

// synth

struct SynthArgs {
  std::string config, traj, out;
  int max_iters = 100;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  const Config cfg = config_or_default(a.config);
  const Trajectory ref = load_trajectory(a.traj);
  if (std::abs(ref.dt * cfg.offline_hz - 1.0) > 1e-9) {
    throw Error("rates.offline_hz: " + fmt("%g", cfg.offline_hz) +
                " Hz does not match the trajectory rate " + fmt("%g", 1.0 / ref.dt) + " Hz");
  }
  IlqrOptions opts;
  opts.max_iters = a.max_iters;
  const LqgWeights weights = cfg.weights.build();
  IlqrResult il = ilqr_nominal(cfg.robot, ref, weights, opts);
  out << "ilqr: " << il.iterations << " iterations, final cost "
      << fmt("%.6g", il.cost_history.back()) << '\n';
  if (!il.converged) {
    const std::string path = a.out + ".cost_history.csv";
    std::string text = "iteration,cost\n";
    for (std::size_t i = 0; i < il.cost_history.size(); ++i) {
      text += std::to_string(i) + ',' + fmt("%.17g", il.cost_history[i]) + '\n';
    }
    write_text(path, text);
    err << "error: iLQR did not converge (" << il.message << "); cost history in " << path
        << '\n';
    return kNotConverged;
  }
  const LqrSynthesis lqr = synthesize_lqr(cfg.robot, il.nominal, weights);
  const KfSynthesis kf = synthesize_kf(cfg.robot, il.nominal, lqr.linearizations, weights);
  const GainSchedule schedule = assemble_schedule(il.nominal, lqr, kf);
  save_schedule(a.out, schedule);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(encode_schedule(schedule))));
  out << "schedule: " << schedule.horizon() << " steps, fnv1a " << hash << '\n';
  return kOk;
}

// simulate

struct SimulateArgs {
  std::string config, controller, gains, traj, out;
  std::optional<std::uint64_t> seed;
  bool noiseless = false;
  MetricFlags metrics;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const Config cfg = config_or_default(a.config);
  const bool lqg = a.controller == "lqg";
  if (lqg && a.gains.empty()) throw Error("--gains is required with --controller lqg");
  if (!lqg && !a.gains.empty()) throw Error("--gains only applies to --controller lqg");
  const Trajectory ref = load_trajectory(a.traj);

  GainSchedule schedule;
  Controller controller = BaselineController{cfg.baseline};
  if (lqg) {
    schedule = load_schedule(a.gains);
    if (std::abs(schedule.duration() - ref.duration()) > 1e-6) {
      throw Error("gain schedule covers " + fmt("%g", schedule.duration()) +
                  " s but the trajectory lasts " + fmt("%g", ref.duration()) + " s");
    }
    controller = LqgController{&schedule, cfg.decimation};
  }
  NoiseConfig noise = a.noiseless ? NoiseConfig::none() : cfg.noise;
  noise.seed = a.seed.value_or(cfg.noise.seed);

  const SimLog log = simulate(cfg.robot, controller, ref, noise, cfg.rates());
  save_simlog(a.out, log);
  if (log.failed_tick) {
    err << "error: simulation failed at tick " << *log.failed_tick << ": " << log.failure
        << "; partial log in " << a.out << '\n';
    return kNumericalFailure;
  }
  out << log.rows.size() << " ticks, " << fmt("%.3f", log.duration()) << " s\n";
  print_rmsd(out, rmsd_metrics(log, ref, a.metrics.skip, a.metrics.window(cfg.robot)));
  return kOk;
}

// compare

struct CompareArgs {
  std::string config, traj, out;
  std::vector<std::string> logs;
  MetricFlags metrics;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const Config cfg = config_or_default(a.config);
  const Trajectory ref = load_trajectory(a.traj);
  std::vector<SimLog> logs;
  for (const auto& p : a.logs) logs.push_back(load_simlog(p));
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const SimLog& log = logs[i];
    const double tol = ref.dt + log.dt_ctrl + 1e-9;
    if (log.rows.empty() || std::abs(log.duration() - ref.duration()) > tol) {
      throw Error(a.logs[i] + ": log lasts " + fmt("%g", log.duration()) +
                  " s but the trajectory lasts " + fmt("%g", ref.duration()) + " s");
    }
    if (std::abs(log.duration() - logs[0].duration()) > 1e-9) {
      throw Error(a.logs[i] + ": duration differs from " + a.logs[0]);
    }
  }
  const std::optional<Rect> window = a.metrics.window(cfg.robot);
  std::vector<Vec6> rmsd(logs.size());
  std::vector<std::string> errors(logs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < logs.size(); ++i) {
    try {
      rmsd[i] = rmsd_metrics(logs[i], ref, a.metrics.skip, window);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (!errors[i].empty()) throw Error(a.logs[i] + ": " + errors[i]);
  }
  write_text(a.out, compare_report(a.logs, rmsd));
  out << "wrote " << a.out << '\n';
  return kOk;
}

// plot

struct PlotArgs {
  std::string log, traj, out;
};

int cmd_plot(const PlotArgs& a, std::ostream& out) {
  const Trajectory ref = load_trajectory(a.traj);
  const SimLog log = load_simlog(a.log);
  if (log.rows.empty()) throw Error(a.log + ": empty log");
  write_text(a.out, render_svg(log, ref));
  out << "wrote " << a.out << '\n';
  return kOk;
}

int map_error(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const IoError*>(&e)) return kIoFailure;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const ConditioningError*>(&e) ||
      dynamic_cast<const GeometryError*>(&e)) {
    return kNumericalFailure;
  }
  if (dynamic_cast<const Error*>(&e)) return kUsage;
  return kIoFailure;
}

}  // namespace

Rect center_window(const RobotParams& params, const Vec2& size) {
  if (!(size.array() > 0).all()) throw Error("--center-size: entries must be > 0");
  const Vec2 c = params.frame_centroid();
  return {c - 0.5 * size, c + 0.5 * size};
}

std::string compare_report(const std::vector<std::string>& names,
                           const std::vector<Vec6>& rmsd) {
  std::string text = "metric";
  for (const auto& n : names) {
    std::string cell = n;
    if (cell.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char c : cell) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      cell = q + '"';
    }
    text += ',' + cell;
  }
  text += '\n';
  for (int r = 0; r < 6; ++r) {
    text += kMetricNames[r];
    for (const auto& m : rmsd) text += ',' + fmt("%.6f", m(r));
    text += '\n';
  }
  return text;
}

namespace {

struct Panel {
  double x, y, w, h;
  double x0, x1, y0, y1;  // data range

  double px(double v) const { return x + (v - x0) / (x1 - x0) * w; }
  double py(double v) const { return y + h - (v - y0) / (y1 - y0) * h; }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

std::string polyline(const Panel& p, const std::vector<Vec2>& pts, const char* id,
                     const char* color) {
  std::ostringstream s;
  s << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << color
    << "\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s << ' ';
    s << fmt("%.2f", p.px(pts[i].x())) << ',' << fmt("%.2f", p.py(pts[i].y()));
  }
  s << "\"/>\n";
  return s.str();
}

std::string frame(const Panel& p, const std::string& title) {
  std::ostringstream s;
  s << "<rect x=\"" << p.x << "\" y=\"" << p.y << "\" width=\"" << p.w << "\" height=\""
    << p.h << "\" fill=\"none\" stroke=\"#999\"/>\n";
  s << "<text x=\"" << p.x + 4 << "\" y=\"" << p.y - 6 << "\">" << title << "</text>\n";
  s << "<text x=\"" << p.x << "\" y=\"" << p.y + p.h + 14 << "\">" << fmt("%.3g", p.x0)
    << "</text>\n";
  s << "<text x=\"" << p.x + p.w << "\" y=\"" << p.y + p.h + 14
    << "\" text-anchor=\"end\">" << fmt("%.3g", p.x1) << "</text>\n";
  s << "<text x=\"" << p.x - 4 << "\" y=\"" << p.y + p.h << "\" text-anchor=\"end\">"
    << fmt("%.3g", p.y0) << "</text>\n";
  s << "<text x=\"" << p.x - 4 << "\" y=\"" << p.y + 10 << "\" text-anchor=\"end\">"
    << fmt("%.3g", p.y1) << "</text>\n";
  return s.str();
}

Panel fit(double x, double y, double w, double h, const std::vector<Vec2>& a,
          const std::vector<Vec2>& b = {}) {
  Panel p{x, y, w, h, INFINITY, -INFINITY, INFINITY, -INFINITY};
  for (const auto* v : {&a, &b}) {
    for (const auto& q : *v) {
      p.x0 = std::min(p.x0, q.x());
      p.x1 = std::max(p.x1, q.x());
      p.y0 = std::min(p.y0, q.y());
      p.y1 = std::max(p.y1, q.y());
    }
  }
  widen(p.x0, p.x1);
  widen(p.y0, p.y1);
  return p;
}

}  // namespace

std::string render_svg(const SimLog& log, const Trajectory& reference) {
  constexpr std::size_t kMaxPoints = 2000;
  const std::size_t stride = std::max<std::size_t>(1, log.rows.size() / kMaxPoints);

  std::vector<Vec2> ref_path, real_path, err_theta, err_x, err_y;
  for (std::size_t k = 0; k < reference.samples.size();
       k += std::max<std::size_t>(1, reference.samples.size() / kMaxPoints)) {
    ref_path.push_back(reference.samples[k].pose.tail<2>());
  }
  for (std::size_t i = 0; i < log.rows.size(); i += stride) {
    const SimRow& r = log.rows[i];
    const TrajectorySample s = reference.at(r.t);
    real_path.push_back(r.x.segment<2>(1));
    err_theta.emplace_back(r.t, std::remainder(r.x(0) - s.pose(0), 2 * M_PI) * 180.0 / M_PI);
    err_x.emplace_back(r.t, 1e3 * (r.x(1) - s.pose(1)));
    err_y.emplace_back(r.t, 1e3 * (r.x(2) - s.pose(2)));
  }

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"560\" "
       "viewBox=\"0 0 1000 560\" font-family=\"sans-serif\" font-size=\"11\">\n"
       "<rect width=\"1000\" height=\"560\" fill=\"white\"/>\n";
  const Panel xy = fit(60, 40, 440, 440, ref_path, real_path);
  s << frame(xy, "x-y path (m): reference (black), realized (red)");
  s << polyline(xy, ref_path, "reference", "black");
  s << polyline(xy, real_path, "realized", "#d62728");

  const std::pair<const char*, std::vector<Vec2>*> traces[3] = {
      {"theta error (deg)", &err_theta}, {"x error (mm)", &err_x}, {"y error (mm)", &err_y}};
  const char* ids[3] = {"error_theta", "error_x", "error_y"};
  for (int i = 0; i < 3; ++i) {
    const Panel p = fit(600, 40 + i * 170, 370, 120, *traces[i].second);
    s << frame(p, std::string(traces[i].first) + " vs t (s)");
    s << polyline(p, *traces[i].second, ids[i], "#1f77b4");
  }
  s << "</svg>\n";
  return s.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cable robot LQG toolkit", "cdpr"};
  app.require_subcommand(1);

  TrajgenArgs tg;
  auto* trajgen = app.add_subcommand("trajgen", "generate the concentric diamond reference");
  trajgen->add_option("--config", tg.config, "config file (for the frame centroid)");
  trajgen->add_option("--area", tg.area, "outer diamond extent WxH (m)");
  trajgen->add_option("--center", tg.center, "diamond center X,Y (m); default frame centroid");
  trajgen->add_option("--rings", tg.rings, "number of rings")->check(CLI::PositiveNumber);
  trajgen->add_option("--vmax", tg.vmax, "speed cap (m/s)")->check(CLI::PositiveNumber);
  trajgen->add_option("--amax", tg.amax, "acceleration cap (m/s^2)")->check(CLI::PositiveNumber);
  trajgen->add_option("--rate", tg.rate, "sample rate (Hz)")->check(CLI::PositiveNumber);
  trajgen->add_option("--hold", tg.hold, "rest before motion (s)")->check(CLI::NonNegativeNumber);
  trajgen->add_option("--out", tg.out, "trajectory CSV")->required();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "offline iLQR, LQR and Kalman synthesis");
  synth->add_option("--config", sy.config, "config file");
  synth->add_option("--traj", sy.traj, "reference trajectory CSV")->required();
  synth->add_option("--out", sy.out, "gain schedule file")->required();
  synth->add_option("--max-iters", sy.max_iters, "iLQR iteration cap")
      ->check(CLI::PositiveNumber);

  SimulateArgs si;
  auto* sim = app.add_subcommand("simulate", "closed-loop simulation");
  sim->add_option("--config", si.config, "config file");
  sim->add_option("--controller", si.controller, "lqg or baseline")
      ->required()
      ->check(CLI::IsMember({"lqg", "baseline"}));
  sim->add_option("--gains", si.gains, "gain schedule (lqg only)");
  sim->add_option("--traj", si.traj, "reference trajectory CSV")->required();
  sim->add_option("--seed", si.seed, "noise seed; default noise.seed");
  sim->add_flag("--noiseless", si.noiseless, "disable all noise");
  sim->add_option("--out", si.out, "simulation log CSV")->required();
  si.metrics.add(sim);

  CompareArgs co;
  auto* compare = app.add_subcommand("compare", "RMSD report over several logs");
  compare->add_option("--config", co.config, "config file (for the center window)");
  compare->add_option("--logs", co.logs, "simulation logs")->required()->expected(1, -1);
  compare->add_option("--traj", co.traj, "reference trajectory CSV")->required();
  compare->add_option("--out", co.out, "report CSV")->required();
  co.metrics.add(compare);

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "SVG of paths and tracking errors");
  plot->add_option("--log", pl.log, "simulation log CSV")->required();
  plot->add_option("--traj", pl.traj, "reference trajectory CSV")->required();
  plot->add_option("--out", pl.out, "SVG file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (trajgen->parsed()) return cmd_trajgen(tg, out);
    if (synth->parsed()) return cmd_synth(sy, out, err);
    if (sim->parsed()) return cmd_simulate(si, out, err);
    if (compare->parsed()) return cmd_compare(co, out);
    if (plot->parsed()) return cmd_plot(pl, out);
  } catch (const std::exception& e) {
    return map_error(e, err);
  }
  return kUsage;
}

}  // namespace cdpr::cli
