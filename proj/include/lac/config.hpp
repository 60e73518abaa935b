#pragma once

#include "lac/model.hpp"
#include "lac/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lac {

enum class ScenarioKind { Fig1Sweep, Fig2Attack, Fig3Arm, Custom };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& name);

enum class WeightSource { Sensitivity, Edpb, Ones };

struct ErrorConfig {
  ErrorSchedule::Kind kind = ErrorSchedule::Kind::Graded;
  double level_start = 0.0;
  double level_stop = 5.0;
  double level_step = 0.1;
  double sigma = 0.5;
  bool mean_ones = true;
  double attack_norm = 4.0;

  /// Graded levels start, start + step, ... up to stop (inclusive, rounded to the step grid).
  std::vector<double> levels() const;
};

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::Fig1Sweep;
  std::string system = "lqc_tracking";  // or "robot_arm"
  double c1 = 0.2;
  double u_max = 10.0;  // +inf means unconstrained
  RobotArmParams arm{};
  double arm_disturbance = 0.02;  // amplitude of the arm's true disturbance a sin(t / 10)
  double arm_x0 = 0.1;

  int T = 200;
  int k = 5;
  double beta = 0.05;
  bool theory_step = false;
  double initial_lambda = 0.5;
  double fixed_lambda = 0.5;
  std::vector<std::string> policies{"LAC", "P-MPC", "N-MPC", "SelfTuning"};
  ErrorConfig errors{};
  GammaPolicy gamma{};
  WeightSource weights = WeightSource::Edpb;
  int edpb_trials = 20;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool offline = true;
  int solver_iterations = 3000;
  /// "auto" uses the closed form on unconstrained LQC and trajectory optimization otherwise.
  std::string backend = "auto";  // or "closed_form", "trajopt"

  std::filesystem::path output = "out";
  bool output_explicit = false;  // set when the config names an output directory
  std::filesystem::path base_dir = ".";  // relative paths resolve against the config location
};

/// Defaults for a scenario kind (all four match the experiment settings).
ScenarioConfig default_config(ScenarioKind kind);

/// Parses a YAML config; an empty document yields the fig1 defaults. Throws
/// std::invalid_argument with every problem found, one per line.
/// `scenario` replaces the document's scenario key (defaults are taken from it).
ScenarioConfig load_config(const std::filesystem::path& path, std::optional<ScenarioKind> scenario = std::nullopt);
ScenarioConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = ".",
                            std::optional<ScenarioKind> scenario = std::nullopt);

/// Human-readable problems (empty when valid).
std::vector<std::string> validate_config(const ScenarioConfig& config);

}  // namespace lac
