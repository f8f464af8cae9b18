#pragma once

// Run configuration. The file format is line-oriented key = value text with
// [section] headers; '#' and ';' start comments and values may be quoted.
//
//   command = sweep-eps          # solve | sweep-eps | sweep-lambda | sweep-kappa
//   seed = 1                     #   | audit | graph-table | uniqueness
//   [scenario]
//   id = S1                      # S1..S5
//   route = A4                   # optional override of the catalog route
//   [mesh]
//   n_cells = 64
//   [time]
//   tau = 1e-3
//   T = 0.1
//   [params]
//   kappa = 1                    # default: scenario nominal
//   eps = 0.1
//   lambda = 0.01                # default: min(lambda_bar, eps^2)
//   model = ch                   # solve only: ch | robin | neumann
//   lambda_ref = 1e-8
//   newton_tol = 1e-10
//   newton_max = 50
//   [sweep]
//   eps_list = 0.1, 0.03, 0.01   # strictly decreasing
//   lambda_list = ...
//   lambda_list_b = ...          # second path for the uniqueness probe
//   kappa_list = ...
//   [graph]
//   spec = porous:2              # overrides the scenario graph
//   pi = sqrt:1
//   r_list = -2, -1, 0, 1, 2     # graph-table sample points
//   [output]
//   path = out/run.csv

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace degdiff::config {

enum class Command { solve, sweep_eps, sweep_lambda, sweep_kappa, audit, graph_table, uniqueness };

std::string_view command_name(Command c);

struct RunConfig {
  Command command = Command::solve;
  std::uint64_t seed = 0;
  std::optional<std::string> scenario;
  std::optional<std::string> route;
  int n_cells = 64;
  double tau = 1e-3;
  double T = 0.1;
  std::optional<double> kappa;
  double eps = 0.1;
  std::optional<double> lambda;
  std::string model = "ch";
  double lambda_ref = 1e-8;
  double newton_tol = 1e-10;
  int newton_max = 50;
  std::vector<double> eps_list;
  std::vector<double> lambda_list;
  std::vector<double> lambda_list_b;
  std::vector<double> kappa_list;
  std::optional<std::string> graph;
  std::optional<std::string> pi;
  std::vector<double> r_list{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  std::optional<std::string> output;
};

/// Parses and validates; throws ConfigError whose message starts with the
/// offending line ("line 7: ...") when one can be pinned down.
RunConfig parse_config(std::string_view text);

RunConfig load_config(const std::string& path);

}  // namespace degdiff::config
