#include "fd/run_io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fd/config.hpp"
#include "fd/version.hpp"

namespace fd {

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << content;
  if (!os) throw std::runtime_error("short write to " + path);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  write_file(tmp, content);
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunPaths write_run_dir(const std::string& out_dir, const ExperimentConfig& cfg,
                       const RunResult& result, const std::string& started_at,
                       const std::string& finished_at) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  RunPaths paths;
  paths.dir = out_dir;
  paths.config_json = (fs::path(out_dir) / "config.json").string();
  paths.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
  paths.summary_json = (fs::path(out_dir) / "summary.json").string();
  paths.manifest_json = (fs::path(out_dir) / "manifest.json").string();

  write_file(paths.config_json, config_to_json(cfg));
  write_file(paths.metrics_csv, metrics_csv(result.rounds));

  nlohmann::json summary;
  summary["rounds"] = result.rounds.size();
  if (!result.rounds.empty()) {
    const RoundMetrics& last = result.rounds.back();
    summary["final"] = {{"server_acc", last.server_acc},
                        {"mean_client_acc", last.mean_client_acc},
                        {"teacher_mean_entropy", last.teacher_mean_entropy},
                        {"union_size", last.union_size}};
  }
  const CommEntry totals = result.ledger.totals();
  summary["comm_totals"] = {{"uplink_scalars", totals.uplink_scalars},
                            {"uplink_index_ints", totals.uplink_index_ints},
                            {"downlink_scalars", totals.downlink_scalars}};
  write_file(paths.summary_json, summary.dump(2) + "\n");

  nlohmann::json manifest;
  manifest["artifact_version"] = kVersion;
  manifest["config"] = nlohmann::json::parse(config_to_json(cfg));
  manifest["started_at"] = started_at;
  manifest["finished_at"] = finished_at;
  manifest["outputs"] = {fs::path(paths.config_json).filename().string(),
                         fs::path(paths.metrics_csv).filename().string(),
                         fs::path(paths.summary_json).filename().string()};
  write_file_atomic(paths.manifest_json, manifest.dump(2) + "\n");
  return paths;
}

}  // namespace fd
