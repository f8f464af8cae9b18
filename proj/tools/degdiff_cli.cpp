// degdiff CONFIG [--assert] [--jobs N] [--out PATH]

#include <CLI11.hpp>

#include <iostream>

#include "degdiff/config.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Degenerate diffusion as the limit of viscous Cahn-Hilliard systems"};
  std::string config_path;
  degdiff::RunOptions opts;
  std::string out;
  app.add_option("config", config_path, "run configuration file")->required();
  app.add_flag("--assert", opts.check_thresholds, "exit 3 when an acceptance threshold is violated");
  app.add_option("--jobs", opts.jobs, "parallel runs within a sweep")->check(CLI::Range(1, 256));
  app.add_option("--out", out, "output CSV path (overrides [output] path)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : degdiff::kConfigError;
  }
  if (!out.empty()) opts.out = out;

  degdiff::config::RunConfig cfg;
  try {
    cfg = degdiff::config::load_config(config_path);
  } catch (const degdiff::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return degdiff::kConfigError;
  }
  return degdiff::run(cfg, opts, std::cout, std::cerr);
}
