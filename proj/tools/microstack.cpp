#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mstack/runner.hpp"
#include "mstack/scenario.hpp"
#include "mstack/uvdar.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void print_issues(const std::vector<mstack::ScenarioIssue>& issues) {
  for (const auto& issue : issues) {
    if (issue.line > 0) {
      std::cerr << "line " << issue.line << ": " << issue.message << "\n";
    } else {
      std::cerr << issue.message << "\n";
    }
  }
}

int cmd_hover(const std::string& platform_name, const std::string& curve_name,
              double payload, double usable, double avionics) {
  const auto catalogs = mstack::load_catalogs(mstack::default_data_dir());
  auto platform = catalogs.platforms.find(platform_name);
  if (platform == catalogs.platforms.end()) {
    std::cerr << "unknown platform '" << platform_name << "'; available:";
    for (const auto& [name, spec] : catalogs.platforms) {
      std::cerr << " " << name;
    }
    std::cerr << "\n";
    return kExitValidation;
  }
  auto curve = catalogs.curves.find(curve_name);
  if (curve == catalogs.curves.end()) {
    std::cerr << "unknown curve '" << curve_name << "'; available:";
    for (const auto& [name, c] : catalogs.curves) {
      std::cerr << " " << name;
    }
    std::cerr << "\n";
    return kExitValidation;
  }
  try {
    const mstack::HoverAnalysis hover = mstack::hover_analysis(
        platform->second, curve->second, {payload, usable, avionics});
    std::printf("platform          %s\n", platform_name.c_str());
    std::printf("curve             %s\n", curve_name.c_str());
    std::printf("payload           %.3f kg\n", payload);
    std::printf("per-motor thrust  %.3f N\n", hover.per_motor_thrust);
    std::printf("throttle          %.1f %%\n", hover.throttle);
    std::printf("electrical power  %.1f W\n", hover.electrical_power);
    std::printf("endurance         %.1f min\n", hover.endurance);
    return kExitOk;
  } catch (const mstack::Unreachable& e) {
    std::cerr << "cannot hover: " << e.what() << "\n";
    return kExitValidation;
  }
}

int cmd_uvdar_set(int length, int max_off_run) {
  mstack::SequenceSetParams params{length, max_off_run};
  try {
    const auto set = mstack::generate_set(params);
    std::cout << mstack::export_set(set, params);
    return kExitOk;
  } catch (const mstack::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
}

int cmd_validate(const std::string& path) {
  const auto catalogs = mstack::load_catalogs(mstack::default_data_dir());
  const auto result = mstack::load_scenario(path, catalogs);
  if (!result.ok()) {
    print_issues(result.errors);
    return kExitValidation;
  }
  std::cout << "scenario ok: " << result.scenario->uavs.size() << " uav(s), "
            << result.scenario->duration << " s\n";
  return kExitOk;
}

int cmd_simulate(const std::string& path, const std::string& out_dir,
                 long seed_override) {
  const auto catalogs = mstack::load_catalogs(mstack::default_data_dir());
  auto result = mstack::load_scenario(path, catalogs);
  if (!result.ok()) {
    print_issues(result.errors);
    return kExitValidation;
  }
  mstack::Scenario scenario = *result.scenario;
  if (seed_override >= 0) {
    scenario.seed = static_cast<std::uint64_t>(seed_override);
  }
  try {
    mstack::Runner runner(scenario, catalogs);
    const mstack::RunReport report = runner.run(out_dir);
    std::cout << report.to_text();
    std::printf("wall_time %.3f s\n", report.wall_time);
    return kExitOk;
  } catch (const mstack::Error& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale multirotor flight stack simulator"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "run a scenario file");
  std::string sim_path;
  std::string out_dir = "out";
  long seed_override = -1;
  simulate->add_option("scenario", sim_path, "scenario file")->required();
  simulate->add_option("--out", out_dir, "output directory for logs + report");
  simulate->add_option("--seed", seed_override, "override the scenario seed");

  auto* hover = app.add_subcommand("hover", "hover operating point + endurance");
  std::string platform;
  std::string curve = "prop_9450";
  double payload = 0.0;
  double usable = 0.8;
  double avionics = 120.0;
  hover->add_option("platform", platform, "platform catalog name")->required();
  hover->add_option("--payload", payload, "payload mass [kg]");
  hover->add_option("--curve", curve, "propulsion curve name");
  hover->add_option("--usable-fraction", usable, "usable battery fraction");
  hover->add_option("--avionics", avionics, "avionics power draw [W]");

  auto* uvdar = app.add_subcommand("uvdar-set", "generate a blink id set");
  int length = 8;
  int max_off_run = 3;
  uvdar->add_option("--length", length, "sequence length")->required();
  uvdar->add_option("--max-off-run", max_off_run, "longest zero run")->required();

  auto* validate = app.add_subcommand("validate", "validate a scenario file");
  std::string validate_path;
  validate->add_option("scenario", validate_path, "scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return cmd_simulate(sim_path, out_dir, seed_override);
    }
    if (hover->parsed()) {
      return cmd_hover(platform, curve, payload, usable, avionics);
    }
    if (uvdar->parsed()) {
      return cmd_uvdar_set(length, max_off_run);
    }
    if (validate->parsed()) {
      return cmd_validate(validate_path);
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
