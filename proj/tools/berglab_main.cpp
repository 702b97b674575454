#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "berglab/bundles.hpp"
#include "berglab/experiments.hpp"
#include "berglab/random_sections.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw berglab::ConfigInvalid("cannot open config file: " + path);
  nlohmann::json j;
  f >> j;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for Bergman kernels on model surfaces"};
  app.require_subcommand(1);

  std::string config_path, out_override, format_override;
  bool have_seed = false;
  std::uint64_t seed_override = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "Execute an experiment");
  run_cmd->add_option("config", config_path, "JSON config file")->required();
  run_cmd->add_option("--seed", seed_override, "Override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  run_cmd->add_option("--out", out_override, "Override the output path");
  run_cmd->add_option("--format", format_override, "Override csv/json");

  std::string validate_path;
  CLI::App* val_cmd = app.add_subcommand("validate", "Check a config file");
  val_cmd->add_option("config", validate_path, "JSON config file")->required();

  CLI::App* cat_cmd =
      app.add_subcommand("list-catalog", "Print the psi and phi catalogs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cat_cmd->parsed()) {
      std::cout << "weight perturbations (psi):\n";
      for (const std::string& id : berglab::psi_catalog_ids())
        std::cout << "  " << id << "\n";
      std::cout << "test forms (phi):\n";
      for (const std::string& id : berglab::form_catalog_ids())
        std::cout << "  " << id << "\n";
      return 0;
    }
    if (val_cmd->parsed()) {
      berglab::ExperimentConfig cfg =
          berglab::config_from_json(load_json(validate_path));
      std::vector<std::string> diags = berglab::validate(cfg);
      for (const std::string& d : diags) std::cout << d << "\n";
      return diags.empty() ? 0 : 2;
    }
    berglab::ExperimentConfig cfg =
        berglab::config_from_json(load_json(config_path));
    if (have_seed) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out = out_override;
    if (!format_override.empty()) cfg.format = format_override;
    auto t0 = std::chrono::steady_clock::now();
    berglab::Report rep = berglab::run(cfg);
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    berglab::write_report(rep, cfg, wall_ms);
    return rep.pass ? 0 : 2;
  } catch (const berglab::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
