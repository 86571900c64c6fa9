#include "fd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fd/errors.hpp"

namespace fd {

namespace {

void validate_report(const LogitReport& r, std::size_t n_classes) {
  const std::string who = "client " + std::to_string(r.client_id);
  if (r.indices.size() != r.rows.rows()) throw ProtocolError(who + ": index/row count mismatch");
  if (r.rows.cols() != n_classes) throw ProtocolError(who + ": row width mismatch");
  for (std::size_t i = 1; i < r.indices.size(); ++i) {
    if (r.indices[i] <= r.indices[i - 1]) {
      throw ProtocolError(who + ": indices not strictly ascending");
    }
  }
  for (std::size_t i = 0; i < r.rows.rows(); ++i) {
    double sum = 0.0;
    for (double v : r.rows.row(i)) {
      if (v < -1e-12 || !std::isfinite(v)) throw ProtocolError(who + ": negative or non-finite probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ProtocolError(who + ": row " + std::to_string(i) + " not normalized");
    }
  }
}

}  // namespace

CommEntry CommLedger::totals() const {
  CommEntry t;
  for (const CommEntry& e : rounds) {
    t.uplink_scalars += e.uplink_scalars;
    t.uplink_index_ints += e.uplink_index_ints;
    t.downlink_scalars += e.downlink_scalars;
  }
  return t;
}

AggregatedTeacher aggregate_average(std::span<const LogitReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_average: no reports");
  const std::size_t n_classes = reports[0].rows.cols();
  for (const LogitReport& r : reports) validate_report(r, n_classes);

  std::map<std::int64_t, std::pair<Vec, int>> acc;  // index -> (row sum, contributors)
  for (const LogitReport& r : reports) {
    for (std::size_t i = 0; i < r.indices.size(); ++i) {
      auto [it, fresh] = acc.try_emplace(r.indices[i], Vec(n_classes), 0);
      auto row = r.rows.row(i);
      for (std::size_t c = 0; c < n_classes; ++c) it->second.first[c] += row[c];
      it->second.second += 1;
    }
  }

  AggregatedTeacher out;
  out.indices.reserve(acc.size());
  out.rows = Mat(acc.size(), n_classes);
  out.contributors.reserve(acc.size());
  std::size_t i = 0;
  for (const auto& [index, entry] : acc) {
    out.indices.push_back(index);
    auto row = out.rows.row(i);
    for (std::size_t c = 0; c < n_classes; ++c) row[c] = entry.first[c] / entry.second;
    out.contributors.push_back(entry.second);
    ++i;
  }
  return out;
}

Vec sharpen_row(std::span<const double> row, double t_era) {
  if (!(t_era > 0.0) || t_era > 1.0) throw std::invalid_argument("era_sharpen: t_era must be in (0, 1]");
  // Work on log p so zero entries stay zero and large exponents cannot
  // overflow: q_i = p_i^(1/t) / sum_j p_j^(1/t).
  double max_p = 0.0;
  for (double v : row) max_p = std::max(max_p, v);
  if (max_p <= 0.0) throw std::invalid_argument("era_sharpen: row has no positive mass");
  Vec out(row.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = row[i] > 0.0 ? std::exp((std::log(row[i]) - std::log(max_p)) / t_era) : 0.0;
    sum += out[i];
  }
  for (std::size_t i = 0; i < row.size(); ++i) out[i] /= sum;
  return out;
}

AggregatedTeacher era_sharpen(const AggregatedTeacher& teacher, double t_era) {
  AggregatedTeacher out;
  out.indices = teacher.indices;
  out.contributors = teacher.contributors;
  out.rows = Mat(teacher.rows.rows(), teacher.rows.cols());
  for (std::size_t i = 0; i < teacher.rows.rows(); ++i) {
    out.rows.set_row(i, sharpen_row(teacher.rows.row(i), t_era));
  }
  return out;
}

CommEntry account(std::span<const LogitReport> reports,
                  std::span<const std::pair<int, std::int64_t>> model_downlinks) {
  CommEntry e;
  for (const LogitReport& r : reports) {
    ClientComm c;
    c.client_id = r.client_id;
    c.uplink_scalars = static_cast<std::int64_t>(r.indices.size() * r.rows.cols());
    c.uplink_index_ints = static_cast<std::int64_t>(r.indices.size());
    e.uplink_scalars += c.uplink_scalars;
    e.uplink_index_ints += c.uplink_index_ints;
    e.per_client.push_back(c);
  }
  for (const auto& [client_id, param_count] : model_downlinks) {
    auto it = std::find_if(e.per_client.begin(), e.per_client.end(),
                           [client_id](const ClientComm& c) { return c.client_id == client_id; });
    if (it == e.per_client.end()) {
      e.per_client.push_back({client_id, 0, 0, param_count});
    } else {
      it->downlink_scalars += param_count;
    }
    e.downlink_scalars += param_count;
  }
  return e;
}

void write_report(std::ostream& os, const LogitReport& report) {
  os << "fdlr 1 " << report.client_id << ' ' << report.indices.size() << ' ' << report.rows.cols()
     << '\n';
  for (std::size_t i = 0; i < report.indices.size(); ++i) {
    os << report.indices[i];
    for (double v : report.rows.row(i)) os << ' ' << format_double(v);
    os << '\n';
  }
}

LogitReport read_report(std::istream& is) {
  std::string magic;
  int version = 0;
  LogitReport r;
  std::size_t count = 0, n_classes = 0;
  is >> magic >> version >> r.client_id >> count >> n_classes;
  if (!is || magic != "fdlr" || version != 1) throw ProtocolError("logit report: bad header");
  r.indices.resize(count);
  r.rows = Mat(count, n_classes);
  for (std::size_t i = 0; i < count; ++i) {
    is >> r.indices[i];
    auto row = r.rows.row(i);
    for (std::size_t c = 0; c < n_classes; ++c) is >> row[c];
  }
  if (!is) throw ProtocolError("logit report: truncated body");
  return r;
}

}  // namespace fd
