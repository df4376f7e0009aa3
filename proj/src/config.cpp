#include "cdpr/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

#include "cdpr/errors.hpp"

namespace cdpr {

namespace {

using Values = std::vector<double>;

struct Key {
  std::string name;
  std::size_t count;
  /// Bit i set: entry i is an angle (or angular rate) and may carry "deg".
  unsigned angular = 0;
  std::function<Values(const Config&)> get;
  std::function<void(Config&, const Values&)> set;
  /// Non-numeric keys format and parse their own text.
  std::function<std::string(const Config&)> get_text = nullptr;
  std::function<void(Config&, const std::string&)> set_text = nullptr;
};

template <int N>
Values to_values(const Eigen::Matrix<double, N, 1>& v) {
  return Values(v.data(), v.data() + N);
}

template <int N>
Eigen::Matrix<double, N, 1> from_values(const Values& v) {
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(v.data());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Key scalar(std::string name, std::function<double&(Config&)> field) {
  return {name, 1, 0,
          [field](const Config& c) {
            Config copy = c;
            return Values{field(copy)};
          },
          [field](Config& c, const Values& v) { field(c) = v[0]; }};
}

template <int N>
Key vector(std::string name, unsigned angular,
           std::function<Eigen::Matrix<double, N, 1>&(Config&)> field) {
  return {name, N, angular,
          [field](const Config& c) {
            Config copy = c;
            return to_values<N>(field(copy));
          },
          [field](Config& c, const Values& v) { field(c) = from_values<N>(v); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    for (int i = 0; i < kNumCables; ++i) {
      k.push_back(vector<2>("robot.frame_point." + std::to_string(i + 1), 0,
                            [i](Config& c) -> Vec2& { return c.robot.frame_points[i]; }));
    }
    for (int i = 0; i < kNumCables; ++i) {
      k.push_back(vector<2>("robot.ee_point." + std::to_string(i + 1), 0,
                            [i](Config& c) -> Vec2& { return c.robot.ee_points[i]; }));
    }
    k.push_back(vector<3>("robot.inertia_diag", 0,
                          [](Config& c) -> Vec3& { return c.robot.inertia_diag; }));
    k.push_back(scalar("robot.winch_inertia", [](Config& c) -> double& { return c.robot.winch_inertia; }));
    k.push_back(scalar("robot.winch_radius", [](Config& c) -> double& { return c.robot.winch_radius; }));
    k.push_back(scalar("robot.viscous_friction", [](Config& c) -> double& { return c.robot.viscous_friction; }));
    k.push_back(scalar("robot.static_friction", [](Config& c) -> double& { return c.robot.static_friction; }));
    k.push_back(scalar("robot.tanh_mu", [](Config& c) -> double& { return c.robot.tanh_mu; }));
    k.push_back(scalar("robot.tension_min", [](Config& c) -> double& { return c.robot.tension_min; }));
    k.push_back(scalar("robot.tension_max", [](Config& c) -> double& { return c.robot.tension_max; }));
    k.push_back({"robot.gravity_enabled", 1, 0, nullptr, nullptr,
                 [](const Config& c) { return std::string(c.robot.gravity_enabled ? "true" : "false"); },
                 [](Config& c, const std::string& s) {
                   if (s == "true") {
                     c.robot.gravity_enabled = true;
                   } else if (s == "false") {
                     c.robot.gravity_enabled = false;
                   } else {
                     throw FormatError("expected true or false");
                   }
                 }});
    k.push_back(scalar("robot.gravity", [](Config& c) -> double& { return c.robot.gravity; }));

    k.push_back(vector<6>("weights.Q_diag", 0, [](Config& c) -> Vec6& { return c.weights.Q_diag; }));
    k.push_back(vector<4>("weights.R_diag", 0, [](Config& c) -> Vec4& { return c.weights.R_diag; }));
    k.push_back(vector<6>("weights.Sigma_0_std", 0b1001,
                          [](Config& c) -> Vec6& { return c.weights.sigma0_std; }));
    k.push_back(vector<8>("weights.Sigma_meas_std", 0,
                          [](Config& c) -> Vec8& { return c.weights.meas_std; }));
    k.push_back(vector<4>("weights.Sigma_torque_std", 0,
                          [](Config& c) -> Vec4& { return c.weights.torque_std; }));

    k.push_back(scalar("baseline.Kp", [](Config& c) -> double& { return c.baseline.Kp; }));
    k.push_back(scalar("baseline.Ki", [](Config& c) -> double& { return c.baseline.Ki; }));
    k.push_back(scalar("baseline.Kd", [](Config& c) -> double& { return c.baseline.Kd; }));
    k.push_back(scalar("baseline.integrator_limit",
                       [](Config& c) -> double& { return c.baseline.integrator_limit; }));

    k.push_back(scalar("noise.meas_std_len", [](Config& c) -> double& { return c.noise.meas_std_len; }));
    k.push_back(scalar("noise.meas_std_rate", [](Config& c) -> double& { return c.noise.meas_std_rate; }));
    k.push_back(scalar("noise.torque_std", [](Config& c) -> double& { return c.noise.torque_std; }));
    k.push_back(vector<6>("noise.initial_std", 0b1001,
                          [](Config& c) -> Vec6& { return c.noise.initial_std; }));
    k.push_back({"noise.seed", 1, 0, nullptr, nullptr,
                 [](const Config& c) { return std::to_string(c.noise.seed); },
                 [](Config& c, const std::string& s) {
                   char* end = nullptr;
                   errno = 0;
                   const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
                   if (s.empty() || *end != '\0' || errno != 0 || s[0] == '-') {
                     throw FormatError("expected a nonnegative integer");
                   }
                   c.noise.seed = v;
                 }});

    k.push_back(scalar("rates.offline_hz", [](Config& c) -> double& { return c.offline_hz; }));
    k.push_back(scalar("rates.ctrl_hz", [](Config& c) -> double& { return c.ctrl_hz; }));
    k.push_back({"rates.substeps", 1, 0, nullptr, nullptr,
                 [](const Config& c) { return std::to_string(c.substeps); },
                 [](Config& c, const std::string& s) {
                   char* end = nullptr;
                   const long v = std::strtol(s.c_str(), &end, 10);
                   if (s.empty() || *end != '\0' || v < 1 || v > 100000) {
                     throw FormatError("expected an integer in [1, 100000]");
                   }
                   c.substeps = static_cast<int>(v);
                 }});
    k.push_back({"rates.decimation", 1, 0, nullptr, nullptr,
                 [](const Config& c) {
                   return std::string(c.decimation == Decimation::Mean ? "mean" : "sample");
                 },
                 [](Config& c, const std::string& s) {
                   if (s == "mean") {
                     c.decimation = Decimation::Mean;
                   } else if (s == "sample") {
                     c.decimation = Decimation::Sample;
                   } else {
                     throw FormatError("expected mean or sample");
                   }
                 }});
    return k;
  }();
  return table;
}

double parse_number(const std::string& raw, bool angular) {
  std::string s = trim(raw);
  bool degrees = false;
  if (s.size() > 3 && s.compare(s.size() - 3, 3, "deg") == 0) {
    if (!angular) throw FormatError("'deg' suffix is only allowed on angle entries");
    s = trim(s.substr(0, s.size() - 3));
    degrees = true;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(v)) {
    throw FormatError("'" + trim(raw) + "' is not a finite number");
  }
  return degrees ? v * std::numbers::pi / 180.0 : v;
}

Values parse_values(const Key& key, const std::string& text) {
  Values out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_number(item, (key.angular >> out.size()) & 1u));
  }
  if (out.size() != key.count) {
    throw FormatError("expected " + std::to_string(key.count) + " value" +
                      (key.count == 1 ? "" : "s") + ", got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace

WeightsConfig WeightsConfig::defaults() {
  const LqgWeights w = LqgWeights::defaults();
  WeightsConfig c;
  c.Q_diag = w.Q.diagonal();
  c.R_diag = w.R.diagonal();
  c.sigma0_std = initial_state_std();
  c.meas_std << Vec4::Constant(0.0018), Vec4::Constant(0.04);
  c.torque_std = Vec4::Constant(0.059);
  return c;
}

LqgWeights WeightsConfig::build() const {
  LqgWeights w;
  w.Q = Q_diag.asDiagonal();
  w.R = R_diag.asDiagonal();
  w.Sigma_0 = sigma0_std.cwiseAbs2().asDiagonal();
  w.Sigma_meas = meas_std.cwiseAbs2().asDiagonal();
  w.Sigma_torque = torque_std.cwiseAbs2().asDiagonal();
  return w;
}

void Config::validate() const {
  robot.validate();
  const auto nonneg = [](const auto& v, const char* key) {
    if (!v.allFinite() || (v.array() < 0).any()) {
      throw Error(std::string(key) + ": entries must be finite and >= 0");
    }
  };
  nonneg(weights.Q_diag, "weights.Q_diag");
  nonneg(weights.sigma0_std, "weights.Sigma_0_std");
  nonneg(weights.torque_std, "weights.Sigma_torque_std");
  if (!(weights.R_diag.array() > 0).all()) throw Error("weights.R_diag: entries must be > 0");
  if (!(weights.meas_std.array() > 0).all()) {
    throw Error("weights.Sigma_meas_std: entries must be > 0");
  }
  baseline.validate();
  noise.validate();
  if (!(offline_hz > 0)) throw Error("rates.offline_hz: must be > 0");
  if (!(ctrl_hz >= offline_hz)) throw Error("rates.ctrl_hz: must be >= rates.offline_hz");
  if (substeps < 1) throw Error("rates.substeps: must be >= 1");
}

Config parse_config(const std::string& text, const std::string& source) {
  std::map<std::string, const Key*> index;
  for (const auto& k : keys()) index[k.name] = &k;

  Config cfg;
  std::map<std::string, std::size_t> seen;
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected 'key = value'");
    const std::string name = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = index.find(name);
    if (it == index.end()) throw FormatError(where + "unknown key '" + name + "'");
    if (const auto prev = seen.find(name); prev != seen.end()) {
      throw FormatError(where + "key '" + name + "' repeats line " +
                        std::to_string(prev->second));
    }
    seen[name] = lineno;
    try {
      const Key& key = *it->second;
      if (key.set_text) {
        key.set_text(cfg, value);
      } else {
        key.set(cfg, parse_values(key, value));
      }
    } catch (const FormatError& e) {
      throw FormatError(where + name + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize_config(const Config& config) {
  std::string out;
  std::string section;
  for (const auto& key : keys()) {
    const std::string sec = key.name.substr(0, key.name.find('.'));
    if (sec != section) {
      if (!section.empty()) out += '\n';
      section = sec;
    }
    out += key.name + " = ";
    if (key.get_text) {
      out += key.get_text(config);
    } else {
      const Values v = key.get(config);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_double(v[i]);
      }
    }
    out += '\n';
  }
  return out;
}

void save_config(const std::string& path, const Config& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << serialize_config(config);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace cdpr
