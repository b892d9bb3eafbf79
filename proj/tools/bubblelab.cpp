// bubblelab: experiment driver for sphere-valued bubbles on the flat torus.
//
//   bubblelab greens  [--config cfg.json] [--out dir]
//   bubblelab verify  [--config cfg.json] [--out dir]
//   bubblelab sweep   [--config cfg.json] [--out dir] [--grid n] [--seed s]
//   bubblelab fit     --snapshot field.bin [--out dir]
//
// Exit codes: 0 ok, 1 config or input error, 2 Green's function failure,
// 3 expansion check failure, 4 minimizer failure.

#include "bubblelab/lab.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  CLI::App app{"bubblelab: epsilon-harmonic bubbles on the flat torus"};
  app.require_subcommand(1);

  std::string config_path, out_dir, snapshot;
  std::optional<int> grid;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--grid", grid, "grid size n (overrides grid_n)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
  };
  CLI::App* greens = app.add_subcommand("greens", "Green's function tables and script-J summary");
  CLI::App* verify = app.add_subcommand("verify", "energy expansions along the model family");
  CLI::App* sweep = app.add_subcommand("sweep", "epsilon continuation sweep with bubble fits");
  CLI::App* fit = app.add_subcommand("fit", "fit bubble parameters to a field snapshot");
  for (CLI::App* sub : {greens, verify, sweep, fit}) add_common(sub);
  fit->add_option("--snapshot", snapshot, "field .bin file with its .meta.json sidecar")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? bubblelab::kExitOk : bubblelab::kExitConfig;
  }

  bubblelab::LabConfig config;
  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      j = nlohmann::json::parse(in);
    }
    if (!out_dir.empty()) j["output_dir"] = out_dir;
    if (grid) j["grid_n"] = *grid;
    if (seed) j["seed"] = *seed;
    config = bubblelab::config_from_json(j);
  } catch (const bubblelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return bubblelab::kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return bubblelab::kExitConfig;
  }

  try {
    if (greens->parsed()) return bubblelab::cmd_greens(config);
    if (verify->parsed()) return bubblelab::cmd_verify_expansions(config);
    if (sweep->parsed()) return bubblelab::cmd_sweep(config);
    return bubblelab::cmd_fit(config, snapshot);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bubblelab::kExitConfig;
  }
}
