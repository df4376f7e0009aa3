#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "cdpr/config.hpp"
#include "cdpr/errors.hpp"

using namespace cdpr;

namespace {

std::string default_path() { return std::string(CDPR_SOURCE_DIR) + "/config/default.cfg"; }

}  // namespace

TEST_CASE("shipped default config equals the built-in defaults") {
  const Config file = load_config(default_path());
  CHECK(serialize_config(file) == serialize_config(Config::defaults()));
  const LqgWeights w = file.weights.build();
  const LqgWeights d = LqgWeights::defaults();
  CHECK(w.Q == d.Q);
  CHECK(w.R == d.R);
  CHECK((w.Sigma_0 - d.Sigma_0).norm() < 1e-18);
  CHECK((w.Sigma_meas - d.Sigma_meas).norm() < 1e-18);
  CHECK(file.noise.initial_std(0) == doctest::Approx(5.7 * std::numbers::pi / 180));
}

TEST_CASE("serialize and parse round trip exactly") {
  Config c = Config::defaults();
  c.robot.winch_radius = 0.1 / 3;
  c.robot.gravity_enabled = false;
  c.weights.Q_diag(3) = 1.0 / 7;
  c.baseline.Kp = 1234.5678901234567;
  c.noise.seed = 18446744073709551615ull;
  c.substeps = 7;
  c.decimation = Decimation::Sample;
  const std::string text = serialize_config(c);
  const Config back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.robot.winch_radius == c.robot.winch_radius);
  CHECK(back.noise.seed == c.noise.seed);
  CHECK(back.decimation == Decimation::Sample);
  CHECK_FALSE(back.robot.gravity_enabled);

  const std::string path = "test_config_roundtrip.cfg";
  save_config(path, c);
  CHECK(serialize_config(load_config(path)) == text);
  std::remove(path.c_str());
}

TEST_CASE("partial files keep defaults; comments and blank lines are ignored") {
  const Config c = parse_config("# comment\n\nbaseline.Kp = 10   # trailing\n");
  CHECK(c.baseline.Kp == 10);
  CHECK(c.baseline.Ki == 5e3);
  CHECK(c.robot.winch_radius == 0.02);
}

TEST_CASE("deg suffix converts angles and is rejected elsewhere") {
  const Config c = parse_config("noise.initial_std = 90deg, 0, 0, 180 deg, 0, 0\n");
  CHECK(c.noise.initial_std(0) == doctest::Approx(std::numbers::pi / 2));
  CHECK(c.noise.initial_std(3) == doctest::Approx(std::numbers::pi));
  CHECK_THROWS_WITH_AS(parse_config("noise.initial_std = 0, 1deg, 0, 0, 0, 0\n"),
                       doctest::Contains("deg"), FormatError);
  CHECK_THROWS_AS(parse_config("robot.gravity = 9deg\n"), FormatError);
}

TEST_CASE("errors name the key and line") {
  CHECK_THROWS_WITH_AS(parse_config("robot.bogus = 1\n", "f.cfg"),
                       doctest::Contains("f.cfg:1: unknown key 'robot.bogus'"), FormatError);
  CHECK_THROWS_WITH_AS(parse_config("x\n", "f.cfg"), doctest::Contains("f.cfg:1:"),
                       FormatError);
  CHECK_THROWS_WITH_AS(parse_config("baseline.Kp = 1\nbaseline.Kp = 2\n"),
                       doctest::Contains("repeats line 1"), FormatError);
  CHECK_THROWS_WITH_AS(parse_config("robot.inertia_diag = 1, 2\n"),
                       doctest::Contains("expected 3 values"), FormatError);
  CHECK_THROWS_WITH_AS(parse_config("baseline.Kd = abc\n"),
                       doctest::Contains("baseline.Kd"), FormatError);
  CHECK_THROWS_AS(parse_config("robot.gravity_enabled = yes\n"), FormatError);
  CHECK_THROWS_AS(parse_config("rates.decimation = median\n"), FormatError);
  CHECK_THROWS_AS(parse_config("rates.substeps = 0\n"), FormatError);
  CHECK_THROWS_AS(parse_config("noise.seed = -3\n"), FormatError);
  CHECK_THROWS_AS(load_config("no/such/file.cfg"), IoError);
}

TEST_CASE("validation errors name the key") {
  CHECK_THROWS_WITH_AS(parse_config("robot.tension_min = 100\nrobot.tension_max = 50\n"),
                       doctest::Contains("robot.tension_max"), Error);
  CHECK_THROWS_WITH_AS(parse_config("robot.winch_radius = 0\n"),
                       doctest::Contains("robot.winch_radius"), Error);
  CHECK_THROWS_WITH_AS(parse_config("weights.R_diag = 1, 0, 1, 1\n"),
                       doctest::Contains("weights.R_diag"), Error);
  CHECK_THROWS_WITH_AS(parse_config("noise.torque_std = -1\n"),
                       doctest::Contains("noise.torque_std"), Error);
  CHECK_THROWS_WITH_AS(parse_config("rates.ctrl_hz = 10\n"),
                       doctest::Contains("rates.ctrl_hz"), Error);
}
