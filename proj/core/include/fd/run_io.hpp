#pragma once

#include <string>

#include "fd/engine.hpp"

namespace fd {

struct RunPaths {
  std::string dir;
  std::string config_json;
  std::string metrics_csv;
  std::string summary_json;
  std::string manifest_json;
};

/// Lay out one run directory: resolved config, metrics CSV, summary, and an
/// atomically written manifest. Timestamps are ISO 8601 UTC and live only in
/// the manifest, so metrics.csv bytes depend on the config alone.
RunPaths write_run_dir(const std::string& out_dir, const ExperimentConfig& cfg,
                       const RunResult& result, const std::string& started_at,
                       const std::string& finished_at);

std::string utc_timestamp();

}  // namespace fd
