#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "fd/numerics.hpp"

namespace fd {

/// One client's upload: the selected public-pool indices and one probability
/// row per index. Indices are strictly ascending and unique; rows normalized.
struct LogitReport {
  int client_id = -1;
  std::vector<std::int64_t> indices;
  Mat rows;  // indices.size() x n_classes
};

/// Per-index averaged (optionally sharpened) teacher rows, joined over the
/// union of the reported index sets.
struct AggregatedTeacher {
  std::vector<std::int64_t> indices;
  Mat rows;
  std::vector<int> contributors;  // >= 1 per retained index
};

struct ClientComm {
  int client_id = -1;
  std::int64_t uplink_scalars = 0;
  std::int64_t uplink_index_ints = 0;
  std::int64_t downlink_scalars = 0;
};

/// One round of communication accounting, in scalar counts.
struct CommEntry {
  std::int64_t uplink_scalars = 0;
  std::int64_t uplink_index_ints = 0;
  std::int64_t downlink_scalars = 0;
  std::vector<ClientComm> per_client;
};

struct CommLedger {
  std::vector<CommEntry> rounds;
  CommEntry totals() const;
};

/// Union-aggregation: every index reported by anyone is kept, averaged over
/// exactly the clients that reported it. Malformed reports raise
/// ProtocolError naming the client.
AggregatedTeacher aggregate_average(std::span<const LogitReport> reports);

/// Entropy-reduction sharpening of one probability row: exponent 1/t_era in
/// log space (softmax of log p over t_era). Never increases entropy for
/// t_era <= 1 and preserves the argmax for every t_era > 0.
Vec sharpen_row(std::span<const double> row, double t_era);

/// sharpen_row applied to every teacher row; contributors preserved.
AggregatedTeacher era_sharpen(const AggregatedTeacher& teacher, double t_era);

/// Uplink = sum over reports of |indices| * n_classes scalars, with the
/// |indices| integer index overhead tracked separately; downlink = sum of
/// the given per-client parameter counts.
CommEntry account(std::span<const LogitReport> reports,
                  std::span<const std::pair<int, std::int64_t>> model_downlinks);

// Text serialization for dump/replay: "fdlr 1 <client> <count> <classes>"
// then one "<index> <p0> ... <p{k-1}>" line per row.
void write_report(std::ostream& os, const LogitReport& report);
LogitReport read_report(std::istream& is);

}  // namespace fd
