#include "degdiff/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "degdiff/errors.hpp"
#include "degdiff/experiments.hpp"
#include "degdiff/graphs.hpp"
#include "degdiff/solver.hpp"

namespace degdiff::config {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (!quoted && (s[i] == '#' || s[i] == ';')) return s.substr(0, i);
  }
  return s;
}

std::string_view unquote(std::string_view s, int line) {
  if (!s.empty() && s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError(fmt::format("line {}: unterminated quote", line));
    return trim(s.substr(1, s.size() - 2));
  }
  return s;
}

[[noreturn]] void fail(int line, std::string_view field, std::string_view msg) {
  throw ConfigError(fmt::format("line {}: {}: {}", line, field, msg));
}

double to_double(std::string_view v, int line, std::string_view field) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    fail(line, field, fmt::format("expected a number, got '{}'", v));
  }
  return out;
}

double to_positive(std::string_view v, int line, std::string_view field) {
  const double x = to_double(v, line, field);
  if (!(x > 0.0)) fail(line, field, fmt::format("must be positive, got {}", x));
  return x;
}

long long to_int(std::string_view v, int line, std::string_view field) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) fail(line, field, fmt::format("expected an integer, got '{}'", v));
  return out;
}

std::vector<double> to_list(std::string_view v, int line, std::string_view field, bool decreasing) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos));
    if (item.empty()) fail(line, field, "empty list entry");
    out.push_back(to_double(item, line, field));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (decreasing) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!(out[i] > 0.0)) fail(line, field, fmt::format("entries must be positive, got {}", out[i]));
      if (i > 0 && !(out[i] < out[i - 1])) {
        fail(line, field, fmt::format("must be strictly decreasing ({} follows {})", out[i], out[i - 1]));
      }
    }
  }
  return out;
}

Command to_command(std::string_view v, int line) {
  static const std::map<std::string_view, Command> table{
      {"solve", Command::solve},           {"sweep-eps", Command::sweep_eps},
      {"sweep-lambda", Command::sweep_lambda}, {"sweep-kappa", Command::sweep_kappa},
      {"audit", Command::audit},           {"graph-table", Command::graph_table},
      {"uniqueness", Command::uniqueness}};
  const auto it = table.find(v);
  if (it == table.end()) {
    fail(line, "command",
         fmt::format("unknown command '{}' (solve, sweep-eps, sweep-lambda, sweep-kappa, audit, "
                     "graph-table, uniqueness)",
                     v));
  }
  return it->second;
}

std::string scenario_list() {
  std::string out;
  for (const auto& id : experiments::scenario_ids()) out += (out.empty() ? "" : ", ") + id;
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view, int)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"command", [](RunConfig& c, std::string_view v, int l) { c.command = to_command(v, l); }},
      {"seed",
       [](RunConfig& c, std::string_view v, int l) {
         const auto s = to_int(v, l, "seed");
         if (s < 0) fail(l, "seed", "must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"scenario.id", [](RunConfig& c, std::string_view v, int) { c.scenario = std::string(v); }},
      {"scenario.route",
       [](RunConfig& c, std::string_view v, int l) {
         if (v != "A4" && v != "A6") fail(l, "scenario.route", fmt::format("expected A4 or A6, got '{}'", v));
         c.route = std::string(v);
       }},
      {"mesh.n_cells",
       [](RunConfig& c, std::string_view v, int l) {
         const auto n = to_int(v, l, "mesh.n_cells");
         if (n < 2 || n > 1'000'000) fail(l, "mesh.n_cells", fmt::format("must lie in [2, 1e6], got {}", n));
         c.n_cells = static_cast<int>(n);
       }},
      {"time.tau", [](RunConfig& c, std::string_view v, int l) { c.tau = to_positive(v, l, "time.tau"); }},
      {"time.T", [](RunConfig& c, std::string_view v, int l) { c.T = to_positive(v, l, "time.T"); }},
      {"params.kappa",
       [](RunConfig& c, std::string_view v, int l) { c.kappa = to_positive(v, l, "params.kappa"); }},
      {"params.eps",
       [](RunConfig& c, std::string_view v, int l) {
         c.eps = to_positive(v, l, "params.eps");
         if (c.eps > 1.0) fail(l, "params.eps", "must lie in (0, 1]");
       }},
      {"params.lambda",
       [](RunConfig& c, std::string_view v, int l) { c.lambda = to_positive(v, l, "params.lambda"); }},
      {"params.model",
       [](RunConfig& c, std::string_view v, int l) {
         if (v != "ch" && v != "robin" && v != "neumann") {
           fail(l, "params.model", fmt::format("expected ch, robin or neumann, got '{}'", v));
         }
         c.model = std::string(v);
       }},
      {"params.lambda_ref",
       [](RunConfig& c, std::string_view v, int l) { c.lambda_ref = to_positive(v, l, "params.lambda_ref"); }},
      {"params.newton_tol",
       [](RunConfig& c, std::string_view v, int l) { c.newton_tol = to_positive(v, l, "params.newton_tol"); }},
      {"params.newton_max",
       [](RunConfig& c, std::string_view v, int l) {
         const auto n = to_int(v, l, "params.newton_max");
         if (n < 1 || n > 10000) fail(l, "params.newton_max", "must lie in [1, 10000]");
         c.newton_max = static_cast<int>(n);
       }},
      {"sweep.eps_list",
       [](RunConfig& c, std::string_view v, int l) { c.eps_list = to_list(v, l, "sweep.eps_list", true); }},
      {"sweep.lambda_list",
       [](RunConfig& c, std::string_view v, int l) {
         c.lambda_list = to_list(v, l, "sweep.lambda_list", true);
       }},
      {"sweep.lambda_list_b",
       [](RunConfig& c, std::string_view v, int l) {
         c.lambda_list_b = to_list(v, l, "sweep.lambda_list_b", true);
       }},
      {"sweep.kappa_list",
       [](RunConfig& c, std::string_view v, int l) {
         c.kappa_list = to_list(v, l, "sweep.kappa_list", true);
       }},
      {"graph.spec",
       [](RunConfig& c, std::string_view v, int l) {
         try {
           graphs::parse_graph(v);
         } catch (const std::invalid_argument& e) {
           fail(l, "graph.spec", e.what());
         }
         c.graph = std::string(v);
       }},
      {"graph.pi",
       [](RunConfig& c, std::string_view v, int l) {
         try {
           graphs::parse_pi(v);
         } catch (const std::invalid_argument& e) {
           fail(l, "graph.pi", e.what());
         }
         c.pi = std::string(v);
       }},
      {"graph.r_list",
       [](RunConfig& c, std::string_view v, int l) { c.r_list = to_list(v, l, "graph.r_list", false); }},
      {"output.path",
       [](RunConfig& c, std::string_view v, int l) {
         if (v.empty()) fail(l, "output.path", "must be nonempty");
         c.output = std::string(v);
       }},
  };
  return table;
}

void require_list(const std::vector<double>& list, std::size_t min_len, std::string_view field,
                  std::string_view command) {
  if (list.size() < min_len) {
    throw ConfigError(fmt::format("{}: command {} needs at least {} values, got {}", field, command,
                                  min_len, list.size()));
  }
}

void validate(const RunConfig& c, const std::map<std::string, int>& seen) {
  const auto cmd = command_name(c.command);
  if (c.command != Command::graph_table) {
    if (!c.scenario) {
      throw ConfigError(fmt::format("missing [scenario] id (available: {})", scenario_list()));
    }
    const auto& ids = experiments::scenario_ids();
    if (std::find(ids.begin(), ids.end(), *c.scenario) == ids.end()) {
      throw ConfigError(fmt::format("line {}: scenario.id: unknown scenario '{}' (available: {})",
                                    seen.at("scenario.id"), *c.scenario, scenario_list()));
    }
  }
  switch (c.command) {
    case Command::sweep_eps:
      require_list(c.eps_list, 2, "sweep.eps_list", cmd);
      if (c.eps_list.front() > 1.0) throw ConfigError("sweep.eps_list: entries must lie in (0, 1]");
      break;
    case Command::sweep_lambda:
      require_list(c.lambda_list, 3, "sweep.lambda_list", cmd);
      break;
    case Command::sweep_kappa:
      require_list(c.kappa_list, 2, "sweep.kappa_list", cmd);
      break;
    case Command::audit:
      require_list(c.eps_list, 1, "sweep.eps_list", cmd);
      require_list(c.lambda_list, 1, "sweep.lambda_list", cmd);
      if (c.eps_list.front() > 1.0) throw ConfigError("sweep.eps_list: entries must lie in (0, 1]");
      break;
    case Command::uniqueness:
      require_list(c.lambda_list, 2, "sweep.lambda_list", cmd);
      require_list(c.lambda_list_b, 2, "sweep.lambda_list_b", cmd);
      break;
    case Command::graph_table:
      if (!c.graph) throw ConfigError("graph-table needs [graph] spec");
      if (!c.lambda) throw ConfigError("graph-table needs [params] lambda");
      if (c.r_list.empty()) throw ConfigError("graph.r_list must be nonempty");
      break;
    case Command::solve:
      break;
  }
  if (c.command != Command::graph_table) {
    // Catches T not being a multiple of tau before any work starts.
    solver::step_count(c.T, c.tau);
  }
}

}  // namespace

std::string_view command_name(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::sweep_eps: return "sweep-eps";
    case Command::sweep_lambda: return "sweep-lambda";
    case Command::sweep_kappa: return "sweep-kappa";
    case Command::audit: return "audit";
    case Command::graph_table: return "graph-table";
    case Command::uniqueness: return "uniqueness";
  }
  return "?";
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::map<std::string, int> seen;
  bool have_command = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("line {}: malformed section header", line_no));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::vector<std::string> sections{"scenario", "mesh", "time", "params",
                                                     "sweep",    "graph", "output"};
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        throw ConfigError(fmt::format("line {}: unknown section [{}]", line_no, section));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    const auto value = unquote(trim(line.substr(eq + 1)), line_no);
    const auto full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, full));
    if (seen.count(full)) {
      throw ConfigError(fmt::format("line {}: duplicate key '{}' (first set on line {})", line_no, full,
                                    seen[full]));
    }
    seen[full] = line_no;
    it->second(cfg, value, line_no);
    if (full == "command") have_command = true;
  }
  if (!have_command) throw ConfigError("missing top-level 'command'");
  validate(cfg, seen);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace degdiff::config
