// fdsim: deterministic federated-distillation experiments and the
// self-training theory checker, driven by JSON configs.
//
// Subcommands:
//   run             one experiment -> run directory (config, metrics, summary)
//   sweep           cross-product of config overrides, one run dir per cell
//   theory          closed form vs Monte Carlo grid -> CSV
//   validate-config parse + validate, print the canonical resolved config

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fd/config.hpp"
#include "fd/engine.hpp"
#include "fd/errors.hpp"
#include "fd/run_io.hpp"
#include "fd/theory.hpp"
#include "fd/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

unsigned jobs_from_env(unsigned fallback) {
  if (const char* env = std::getenv("FDSIM_JOBS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return fallback;
}

std::string out_from_env(const std::string& fallback) {
  if (const char* env = std::getenv("FDSIM_OUT")) return env;
  return fallback;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw fd::ConfigError(flag + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw fd::ConfigError(flag + ": empty list");
  return out;
}

struct Axis {
  std::string path;          // dotted config path
  std::vector<json> values;  // parsed JSON scalars
};

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
    throw fd::ConfigError("--axis expects FIELD=V1,V2,... got '" + spec + "'");
  }
  Axis axis;
  axis.path = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    json v;
    try {
      v = json::parse(item);
    } catch (const json::parse_error&) {
      v = item;  // bare strings are taken verbatim
    }
    axis.values.push_back(v);
  }
  if (axis.values.empty()) throw fd::ConfigError("--axis '" + axis.path + "': empty value list");
  return axis;
}

json::json_pointer to_pointer(const std::string& dotted) {
  std::string p;
  for (char c : dotted) p += (c == '.') ? '/' : c;
  return json::json_pointer("/" + p);
}

int run_one(const fd::ExperimentConfig& cfg, const std::string& out_dir, bool quiet,
            fd::RunResult* out = nullptr) {
  fs::create_directories(out_dir);
  const std::string started = fd::utc_timestamp();
  const std::string csv_path = (fs::path(out_dir) / "metrics.csv").string();
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) {
    std::cerr << "fdsim: cannot open " << csv_path << " for writing\n";
    return 1;
  }
  csv << fd::kMetricsCsvHeader;
  csv.flush();

  // Stream rows so an aborted run still leaves a partial CSV behind.
  fd::RunResult result;
  try {
    result = fd::run_experiment(cfg, [&csv](const fd::RoundMetrics& m) {
      csv << fd::metrics_csv_row(m);
      csv.flush();
    });
  } catch (const std::exception& e) {
    std::cerr << "fdsim: run failed: " << e.what() << "\n";
    std::cerr << "fdsim: partial metrics preserved at " << csv_path << "\n";
    return 1;
  }
  csv.close();

  fd::write_run_dir(out_dir, cfg, result, started, fd::utc_timestamp());
  if (!quiet) {
    std::cout << "wrote " << out_dir << " (" << result.rounds.size() << " rounds";
    if (!result.rounds.empty()) {
      std::cout << ", final server_acc " << fd::format_double(result.rounds.back().server_acc);
    }
    std::cout << ")\n";
  }
  if (out) *out = std::move(result);
  return 0;
}

int cmd_run(const std::string& config_path, std::string out_dir,
            const std::optional<std::uint64_t>& seed) {
  fd::ExperimentConfig cfg = fd::load_config(config_path);
  if (seed) cfg.seed = *seed;
  fd::validate(cfg);
  return run_one(cfg, out_dir, false);
}

int cmd_validate(const std::string& config_path) {
  const fd::ExperimentConfig cfg = fd::load_config(config_path);
  fd::validate(cfg);
  std::cout << fd::config_to_json(cfg);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& axis_specs,
              std::string out_dir, unsigned jobs, const std::optional<std::uint64_t>& seed) {
  fd::ExperimentConfig base = fd::load_config(config_path);
  if (seed) base.seed = *seed;
  fd::validate(base);

  std::vector<Axis> axes;
  const json base_json = json::parse(fd::config_to_json(base));
  for (const std::string& spec : axis_specs) {
    Axis axis = parse_axis(spec);
    if (!base_json.contains(to_pointer(axis.path))) {
      throw fd::ConfigError("--axis '" + axis.path + "' does not name a config field");
    }
    axes.push_back(std::move(axis));
  }

  // Row-major cross product of the axis values.
  std::size_t n_cells = 1;
  for (const Axis& a : axes) n_cells *= a.values.size();

  struct Cell {
    std::string name;
    fd::ExperimentConfig cfg;
    std::string dir;
    json row;
    bool ok = false;
    std::string final_acc, final_client_acc;
    std::int64_t uplink = 0, downlink = 0;
  };
  std::vector<Cell> cells(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) {
    json j = base_json;
    std::string name;
    std::size_t rest = i;
    for (const Axis& a : axes) {
      const json& v = a.values[rest % a.values.size()];
      j[to_pointer(a.path)] = v;
      if (!name.empty()) name += "__";
      name += a.path + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
      cells[i].row[a.path] = v;
      rest /= a.values.size();
    }
    cells[i].cfg = fd::parse_config_json(j.dump());
    fd::validate(cells[i].cfg);
    cells[i].name = name.empty() ? "single" : name;
    cells[i].dir = (fs::path(out_dir) / cells[i].name).string();
  }

  fs::create_directories(out_dir);
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, n_cells));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      fd::RunResult r;
      if (run_one(cell.cfg, cell.dir, true, &r) != 0) {
        failures.fetch_add(1);
        continue;
      }
      cell.ok = true;
      if (!r.rounds.empty()) {
        cell.final_acc = fd::format_double(r.rounds.back().server_acc);
        cell.final_client_acc = fd::format_double(r.rounds.back().mean_client_acc);
      }
      const fd::CommEntry totals = r.ledger.totals();
      cell.uplink = totals.uplink_scalars;
      cell.downlink = totals.downlink_scalars;
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  std::ofstream summary(fs::path(out_dir) / "summary.csv", std::ios::binary);
  for (const Axis& a : axes) summary << a.path << ',';
  summary << "final_server_acc,final_mean_client_acc,total_uplink_scalars,total_downlink_scalars\n";
  for (const Cell& cell : cells) {
    if (!cell.ok) continue;
    for (const Axis& a : axes) {
      const json& v = cell.row.at(a.path);
      summary << (v.is_string() ? v.get<std::string>() : v.dump()) << ',';
    }
    summary << cell.final_acc << ',' << cell.final_client_acc << ',' << cell.uplink << ','
            << cell.downlink << '\n';
  }
  summary.close();
  std::cout << "sweep: " << n_cells - static_cast<std::size_t>(failures.load()) << "/" << n_cells
            << " cells into " << out_dir << "\n";
  return failures.load() == 0 ? 0 : 1;
}

int cmd_theory(const std::vector<double>& alphas, const std::vector<double>& sigmas,
               const std::vector<double>& gammas, const std::vector<double>& ubars,
               std::size_t p, std::size_t trials, std::uint64_t seed, unsigned jobs,
               bool check, double tolerance, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string csv_path = (fs::path(out_dir) / "theory.csv").string();
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) {
    std::cerr << "fdsim: cannot open " << csv_path << "\n";
    return 1;
  }
  csv << "alpha,sigma,Gamma,u_bar,closed_form,mc_mean,mc_se,p,trials\n";

  fd::RngStream root(seed, "theory");
  bool any_exceeded = false;
  for (double alpha : alphas) {
    for (double sigma : sigmas) {
      for (double gamma : gammas) {
        for (double ubar : ubars) {
          const fd::TheoremParams tp{alpha, sigma, gamma, ubar};
          const std::string cell_label = "cell.a" + fd::format_double(alpha) + ".s" +
                                         fd::format_double(sigma) + ".g" +
                                         fd::format_double(gamma) + ".u" +
                                         fd::format_double(ubar);
          std::string closed = "nan", mean = "nan", se = "nan";
          bool degenerate = false;
          double cf = 0.0, mc_mean = 0.0;
          try {
            cf = fd::theorem1_closed_form(tp);
            fd::RngStream cell_rng = root.split(cell_label);
            const fd::McResult mc = fd::monte_carlo_cot(tp, p, trials, cell_rng, jobs);
            mc_mean = mc.mean;
            closed = fd::format_double(cf);
            mean = fd::format_double(mc.mean);
            se = fd::format_double(mc.se);
          } catch (const fd::DegenerateThresholdError& e) {
            degenerate = true;
            std::cerr << "fdsim: degenerate cell (alpha=" << alpha << " sigma=" << sigma
                      << " Gamma=" << gamma << " u_bar=" << ubar << "): " << e.what() << "\n";
          }
          csv << fd::format_double(alpha) << ',' << fd::format_double(sigma) << ','
              << fd::format_double(gamma) << ',' << fd::format_double(ubar) << ',' << closed
              << ',' << mean << ',' << se << ',' << p << ',' << trials << '\n';
          if (check && !degenerate) {
            const double rel = std::abs(mc_mean - cf) / std::max(std::abs(cf), 1e-12);
            if (rel > tolerance) {
              any_exceeded = true;
              std::cerr << "fdsim: check failed at alpha=" << alpha << " sigma=" << sigma
                        << " Gamma=" << gamma << " u_bar=" << ubar << ": rel err "
                        << fd::format_double(rel) << " > " << fd::format_double(tolerance)
                        << "\n";
            }
          }
        }
      }
    }
  }
  csv.close();

  json manifest;
  manifest["artifact_version"] = fd::kVersion;
  manifest["grid"] = {{"alpha", alphas}, {"sigma", sigmas}, {"Gamma", gammas},
                      {"u_bar", ubars}, {"p", p}, {"trials", trials}, {"seed", seed}};
  manifest["outputs"] = {"theory.csv"};
  std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << "\n";

  std::cout << "wrote " << csv_path << "\n";
  return any_exceeded ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic federated-distillation simulator and theory checker"};
  app.set_version_flag("--version", std::string(fd::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir = out_from_env("out");
  unsigned jobs = jobs_from_env(1);
  std::optional<std::uint64_t> seed_override;

  auto* run = app.add_subcommand("run", "execute one experiment config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (env FDSIM_OUT)");
  std::uint64_t run_seed = 0;
  auto* run_seed_opt = run->add_option("--seed", run_seed, "override config seed");

  auto* sweep = app.add_subcommand("sweep", "cross-product of config overrides");
  std::vector<std::string> axis_specs;
  sweep->add_option("config", config_path, "base experiment config (JSON)")->required();
  sweep->add_option("--axis", axis_specs, "axis spec FIELD=V1,V2,... (repeatable)");
  sweep->add_option("--out", out_dir, "output directory (env FDSIM_OUT)");
  sweep->add_option("--jobs", jobs, "parallel cells (env FDSIM_JOBS)");
  std::uint64_t sweep_seed = 0;
  auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "override config seed");

  auto* theory = app.add_subcommand("theory", "closed form vs Monte Carlo grid");
  std::string alphas = "0.3,0.5,0.7", sigmas = "0.5,1", gammas = "0,0.5,1", ubars = "0.5,1,2";
  std::size_t p = 2000, trials = 50;
  std::uint64_t theory_seed = 1;
  bool check = false;
  double tolerance = 0.10;
  theory->add_option("--alpha", alphas, "initial correlations (comma list)");
  theory->add_option("--sigma", sigmas, "noise scales (comma list)");
  theory->add_option("--gamma", gammas, "acceptance thresholds (comma list)");
  theory->add_option("--ubar", ubars, "unlabeled/dimension ratios (comma list)");
  theory->add_option("--p", p, "ambient dimension");
  theory->add_option("--trials", trials, "Monte Carlo trials per cell");
  theory->add_option("--seed", theory_seed, "stream seed");
  theory->add_option("--jobs", jobs, "threads for trials (env FDSIM_JOBS)");
  theory->add_flag("--check", check, "exit nonzero if any cell exceeds --tolerance");
  theory->add_option("--tolerance", tolerance, "relative closed-form/MC tolerance");
  theory->add_option("--out", out_dir, "output directory (env FDSIM_OUT)");

  auto* validate_cmd = app.add_subcommand("validate-config", "parse, validate, print canonical form");
  validate_cmd->add_option("config", config_path, "experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (*run_seed_opt) seed_override = run_seed;
      return cmd_run(config_path, out_dir, seed_override);
    }
    if (sweep->parsed()) {
      if (*sweep_seed_opt) seed_override = sweep_seed;
      return cmd_sweep(config_path, axis_specs, out_dir, jobs, seed_override);
    }
    if (theory->parsed()) {
      return cmd_theory(parse_double_list(alphas, "--alpha"), parse_double_list(sigmas, "--sigma"),
                        parse_double_list(gammas, "--gamma"), parse_double_list(ubars, "--ubar"),
                        p, trials, theory_seed, jobs, check, tolerance, out_dir);
    }
    if (validate_cmd->parsed()) return cmd_validate(config_path);
  } catch (const fd::ConfigError& e) {
    std::cerr << "fdsim: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fdsim: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
