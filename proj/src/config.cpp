#include "lac/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lac {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Fig1Sweep: return "fig1_sweep";
    case ScenarioKind::Fig2Attack: return "fig2_attack";
    case ScenarioKind::Fig3Arm: return "fig3_arm";
    case ScenarioKind::Custom: return "custom";
  }
  return "custom";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "fig1_sweep") return ScenarioKind::Fig1Sweep;
  if (name == "fig2_attack") return ScenarioKind::Fig2Attack;
  if (name == "fig3_arm") return ScenarioKind::Fig3Arm;
  if (name == "custom") return ScenarioKind::Custom;
  throw std::invalid_argument(fmt::format("unknown scenario '{}'", name));
}

std::vector<double> ErrorConfig::levels() const {
  if (kind != ErrorSchedule::Kind::Graded) return {0.0};
  std::vector<double> out;
  if (!(level_step > 0.0)) return {level_start};
  const auto count = static_cast<long>(std::floor((level_stop - level_start) / level_step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    // Rounded to the step grid so 0.1 * 30 prints as 3, not 3.0000000000000004.
    const double raw = level_start + static_cast<double>(i) * level_step;
    out.push_back(std::round(raw * 1e9) / 1e9);
  }
  return out;
}

ScenarioConfig default_config(ScenarioKind kind) {
  ScenarioConfig c;
  c.scenario = kind;
  switch (kind) {
    case ScenarioKind::Fig1Sweep:
      c.output = "out/fig1_sweep";
      break;
    case ScenarioKind::Fig2Attack:
      c.c1 = 1.0;
      c.errors.kind = ErrorSchedule::Kind::Attack;
      c.seeds = {0};
      c.output = "out/fig2_attack";
      break;
    case ScenarioKind::Fig3Arm:
      c.system = "robot_arm";
      c.errors.kind = ErrorSchedule::Kind::Attack;
      c.gamma = GammaPolicy{GammaPolicy::Kind::Fixed, 0.05};
      c.seeds = {0};
      c.output = "out/fig3_arm";
      break;
    case ScenarioKind::Custom:
      c.errors.kind = ErrorSchedule::Kind::None;
      c.seeds = {0};
      c.output = "out/custom";
      break;
  }
  return c;
}

namespace {

ErrorSchedule::Kind parse_error_kind(const std::string& s) {
  if (s == "none") return ErrorSchedule::Kind::None;
  if (s == "graded") return ErrorSchedule::Kind::Graded;
  if (s == "attack") return ErrorSchedule::Kind::Attack;
  throw std::invalid_argument(fmt::format("unknown error kind '{}'", s));
}

WeightSource parse_weights(const std::string& s) {
  if (s == "sensitivity") return WeightSource::Sensitivity;
  if (s == "edpb") return WeightSource::Edpb;
  if (s == "ones") return WeightSource::Ones;
  throw std::invalid_argument(fmt::format("unknown weight source '{}'", s));
}

double parse_bound(const YAML::Node& n) {
  const auto s = n.as<std::string>();
  if (s == "none" || s == "inf" || s == ".inf") return std::numeric_limits<double>::infinity();
  return n.as<double>();
}

// Collects conversion failures instead of stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  template <class F>
  void get(const YAML::Node& parent, const char* key, F&& assign) {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      assign(n);
    } catch (const std::exception& e) {
      errors_.push_back(fmt::format("{}: {}", key, e.what()));
    }
  }

 private:
  std::vector<std::string>& errors_;
};

void check_keys(const YAML::Node& node, std::initializer_list<const char*> known, const std::string& where,
                std::vector<std::string>& errors) {
  if (!node.IsMap()) return;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) errors.push_back(fmt::format("unknown key '{}{}'", where, key));
  }
}

}  // namespace

ScenarioConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir,
                            std::optional<ScenarioKind> scenario) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(fmt::format("config is not valid YAML: {}", e.what()));
  }
  std::vector<std::string> errors;
  ScenarioConfig c = default_config(scenario.value_or(ScenarioKind::Fig1Sweep));
  if (root && !root.IsNull()) {
    if (!root.IsMap()) throw std::invalid_argument("config must be a mapping");
    check_keys(root,
               {"scenario", "system", "T", "k", "beta", "initial_lambda", "fixed_lambda", "policies",
                "errors", "gamma", "weights", "edpb_trials", "seeds", "offline", "solver_iterations", "backend", "output"},
               "", errors);
    if (root["scenario"] && !scenario) {
      try {
        c = default_config(parse_scenario_kind(root["scenario"].as<std::string>()));
      } catch (const std::exception& e) {
        errors.push_back(fmt::format("scenario: {}", e.what()));
      }
    }
    Reader r(errors);
    if (const YAML::Node sys = root["system"]) {
      if (sys.IsScalar()) {
        c.system = sys.as<std::string>();
      } else {
        check_keys(sys, {"name", "c1", "u_max", "c2", "c3", "c4", "state_bound", "input_bound", "disturbance", "x0"},
                   "system.", errors);
        r.get(sys, "name", [&](const YAML::Node& n) { c.system = n.as<std::string>(); });
        r.get(sys, "c1", [&](const YAML::Node& n) { c.c1 = n.as<double>(); });
        r.get(sys, "u_max", [&](const YAML::Node& n) { c.u_max = parse_bound(n); });
        r.get(sys, "c2", [&](const YAML::Node& n) { c.arm.c2 = n.as<double>(); });
        r.get(sys, "c3", [&](const YAML::Node& n) { c.arm.c3 = n.as<double>(); });
        r.get(sys, "c4", [&](const YAML::Node& n) { c.arm.c4 = n.as<double>(); });
        r.get(sys, "state_bound", [&](const YAML::Node& n) { c.arm.state_bound = n.as<double>(); });
        r.get(sys, "input_bound", [&](const YAML::Node& n) { c.arm.input_bound = n.as<double>(); });
        r.get(sys, "disturbance", [&](const YAML::Node& n) { c.arm_disturbance = n.as<double>(); });
        r.get(sys, "x0", [&](const YAML::Node& n) { c.arm_x0 = n.as<double>(); });
      }
    }
    r.get(root, "T", [&](const YAML::Node& n) { c.T = n.as<int>(); });
    r.get(root, "k", [&](const YAML::Node& n) { c.k = n.as<int>(); });
    r.get(root, "beta", [&](const YAML::Node& n) {
      if (n.IsScalar() && n.as<std::string>() == "theory") {
        c.theory_step = true;
      } else {
        c.beta = n.as<double>();
        c.theory_step = false;
      }
    });
    r.get(root, "initial_lambda", [&](const YAML::Node& n) { c.initial_lambda = n.as<double>(); });
    r.get(root, "fixed_lambda", [&](const YAML::Node& n) { c.fixed_lambda = n.as<double>(); });
    r.get(root, "policies", [&](const YAML::Node& n) { c.policies = n.as<std::vector<std::string>>(); });
    if (const YAML::Node e = root["errors"]) {
      check_keys(e, {"kind", "levels", "sigma", "mean", "attack_norm"}, "errors.", errors);
      r.get(e, "kind", [&](const YAML::Node& n) { c.errors.kind = parse_error_kind(n.as<std::string>()); });
      if (const YAML::Node lv = e["levels"]) {
        if (lv.IsScalar()) {
          r.get(e, "levels", [&](const YAML::Node& n) {
            c.errors.level_start = c.errors.level_stop = n.as<double>();
          });
        } else {
          check_keys(lv, {"start", "stop", "step"}, "errors.levels.", errors);
          r.get(lv, "start", [&](const YAML::Node& n) { c.errors.level_start = n.as<double>(); });
          r.get(lv, "stop", [&](const YAML::Node& n) { c.errors.level_stop = n.as<double>(); });
          r.get(lv, "step", [&](const YAML::Node& n) { c.errors.level_step = n.as<double>(); });
        }
      }
      r.get(e, "sigma", [&](const YAML::Node& n) { c.errors.sigma = n.as<double>(); });
      r.get(e, "mean", [&](const YAML::Node& n) {
        const auto s = n.as<std::string>();
        if (s == "ones") c.errors.mean_ones = true;
        else if (s == "zero") c.errors.mean_ones = false;
        else throw std::invalid_argument("expected 'ones' or 'zero'");
      });
      r.get(e, "attack_norm", [&](const YAML::Node& n) { c.errors.attack_norm = n.as<double>(); });
    }
    r.get(root, "gamma", [&](const YAML::Node& n) {
      if (n.IsScalar() && n.as<std::string>() == "auto") {
        c.gamma = GammaPolicy{};
      } else if (n.IsMap() && n["radius"]) {
        c.gamma = GammaPolicy{GammaPolicy::Kind::Fixed, n["radius"].as<double>()};
      } else {
        throw std::invalid_argument("expected 'auto' or {radius: r}");
      }
    });
    r.get(root, "weights", [&](const YAML::Node& n) { c.weights = parse_weights(n.as<std::string>()); });
    r.get(root, "edpb_trials", [&](const YAML::Node& n) { c.edpb_trials = n.as<int>(); });
    r.get(root, "seeds", [&](const YAML::Node& n) {
      if (n.IsScalar()) c.seeds = {n.as<std::uint64_t>()};
      else c.seeds = n.as<std::vector<std::uint64_t>>();
    });
    r.get(root, "offline", [&](const YAML::Node& n) { c.offline = n.as<bool>(); });
    r.get(root, "solver_iterations", [&](const YAML::Node& n) { c.solver_iterations = n.as<int>(); });
    r.get(root, "backend", [&](const YAML::Node& n) { c.backend = n.as<std::string>(); });
    r.get(root, "output", [&](const YAML::Node& n) {
      c.output = n.as<std::string>();
      c.output_explicit = true;
    });
  }
  c.base_dir = base_dir;
  for (auto& e : validate_config(c)) errors.push_back(std::move(e));
  if (!errors.empty()) {
    std::ostringstream msg;
    for (std::size_t i = 0; i < errors.size(); ++i) msg << (i ? "\n" : "") << errors[i];
    throw std::invalid_argument(msg.str());
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path, std::optional<ScenarioKind> scenario) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(text.str(), base, scenario);
}

std::vector<std::string> validate_config(const ScenarioConfig& c) {
  std::vector<std::string> errors;
  if (c.k < 1) errors.emplace_back("window must be >= 1");
  if (c.T < 1) errors.emplace_back("T must be >= 1");
  if (c.k >= 1 && c.T >= 1 && c.T < c.k) errors.emplace_back(fmt::format("T ({}) must be >= k ({})", c.T, c.k));
  if (!c.theory_step && !(c.beta > 0.0)) errors.emplace_back("beta must be > 0");
  if (!(c.initial_lambda >= 0.0 && c.initial_lambda <= 1.0)) errors.emplace_back("initial_lambda must lie in [0, 1]");
  if (!(c.fixed_lambda >= 0.0 && c.fixed_lambda <= 1.0)) errors.emplace_back("fixed_lambda must lie in [0, 1]");
  if (c.seeds.empty()) errors.emplace_back("seeds must be nonempty");
  if (c.policies.empty()) errors.emplace_back("policies must be nonempty");
  for (const auto& p : c.policies) {
    try {
      parse_policy_kind(p);
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
    }
  }
  if (c.system != "lqc_tracking" && c.system != "robot_arm") {
    errors.push_back(fmt::format("unknown system '{}' (expected lqc_tracking or robot_arm)", c.system));
  }
  if (c.system == "lqc_tracking") {
    if (!(c.c1 > 0.0)) errors.emplace_back("c1 must be > 0");
    if (!(c.u_max > 0.0)) errors.emplace_back("u_max must be > 0");
  }
  if (c.system == "robot_arm") {
    if (!(c.arm.state_bound > 0.0)) errors.emplace_back("state_bound must be > 0");
    if (!(c.arm.input_bound > 0.0)) errors.emplace_back("input_bound must be > 0");
    if (!(c.arm.c4 > 0.0)) errors.emplace_back("c4 must be > 0");
    if (std::abs(c.arm_x0) > c.arm.state_bound) errors.emplace_back("x0 must lie inside the state box");
  }
  if (c.gamma.kind == GammaPolicy::Kind::Fixed && !(c.gamma.radius > 0.0)) errors.emplace_back("gamma radius must be > 0");
  if (c.errors.kind == ErrorSchedule::Kind::Graded) {
    if (!(c.errors.level_step > 0.0)) errors.emplace_back("error level step must be > 0");
    if (c.errors.level_start < 0.0 || c.errors.level_stop < c.errors.level_start) {
      errors.emplace_back("error levels must satisfy 0 <= start <= stop");
    }
  }
  if (!(c.errors.sigma >= 0.0)) errors.emplace_back("sigma must be >= 0");
  if (!(c.errors.attack_norm >= 0.0)) errors.emplace_back("attack_norm must be >= 0");
  if (c.edpb_trials < 1) errors.emplace_back("edpb_trials must be >= 1");
  if (c.backend != "auto" && c.backend != "closed_form" && c.backend != "trajopt") {
    errors.push_back(fmt::format("unknown backend '{}'", c.backend));
  }
  if (c.backend == "closed_form" && c.system != "lqc_tracking") errors.emplace_back("closed_form backend needs a linear system");
  if (c.solver_iterations < 1) errors.emplace_back("solver_iterations must be >= 1");
  return errors;
}

}  // namespace lac
