// File formats: trace CSV, sweep curve CSV, diagnostics CSV, snapshot dump
// into the flat binary container, and the plain-text ledger format consumed
// by `diagnose --ledger`.
//
// Floats are printed with 17 significant digits so every emitted CSV
// round-trips to the exact double.  The trace CSV's k_t/alpha_t columns hold
// the first assignment made at that step (-1 when the step assigned
// nothing); buffered strategies can assign several jobs at one step, and the
// full list lives in the in-memory trace.
#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "asgrad/dataset.hpp"
#include "asgrad/engine.hpp"
#include "asgrad/errors.hpp"

namespace asgrad {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr const char* kTraceCsvHeader = "t,time,i_t,pi_t,tau_t,k_t,alpha_t,grad_norm_sq,loss";

inline void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << kTraceCsvHeader << '\n';
  for (const auto& rec : trace.records) {
    const int k = rec.assigned.empty() ? -1 : rec.assigned.front().worker;
    const std::int64_t alpha = rec.assigned.empty() ? -1 : rec.assigned.front().model_index;
    out << rec.t << ',' << fmt17(rec.sim_time) << ',' << rec.i_t << ',' << rec.pi_t << ','
        << rec.tau_t << ',' << k << ',' << alpha << ',' << fmt17(rec.grad_norm_sq) << ','
        << fmt17(rec.loss) << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

struct TraceRow {
  std::int64_t t = 0;
  double time = 0.0;
  int i_t = 0;
  std::int64_t pi_t = 0;
  std::int64_t tau_t = 0;
  int k_t = -1;
  std::int64_t alpha_t = -1;
  double grad_norm_sq = 0.0;
  double loss = 0.0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": bad number '" + s + "'");
  }
}

inline std::int64_t to_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": bad integer '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader)
    throw ParseError(path + ": unexpected trace header");
  std::vector<TraceRow> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != 9) throw ParseError(where + ": expected 9 fields");
    TraceRow r;
    r.t = detail::to_int(f[0], where);
    r.time = detail::to_double(f[1], where);
    r.i_t = static_cast<int>(detail::to_int(f[2], where));
    r.pi_t = detail::to_int(f[3], where);
    r.tau_t = detail::to_int(f[4], where);
    r.k_t = static_cast<int>(detail::to_int(f[5], where));
    r.alpha_t = detail::to_int(f[6], where);
    r.grad_norm_sq = detail::to_double(f[7], where);
    r.loss = detail::to_double(f[8], where);
    rows.push_back(r);
  }
  return rows;
}

// Snapshot dump reuses the flat binary container: one "shard" per snapshot
// (m = 1), labels filled with +1.
inline void save_snapshots(const Trace& trace, const std::string& path) {
  Dataset ds;
  ds.n = static_cast<std::int64_t>(trace.snapshots.size());
  ds.m = 1;
  ds.d = trace.d;
  if (ds.n == 0) throw ParameterError("no snapshots to save");
  ds.features.reserve(static_cast<std::size_t>(ds.n * ds.d));
  for (const auto& snap : trace.snapshots)
    ds.features.insert(ds.features.end(), snap.begin(), snap.end());
  ds.labels.assign(static_cast<std::size_t>(ds.n), std::int8_t{1});
  save_dataset(ds, path);
}

constexpr const char* kCurveCsvHeader = "t,seed,grad_norm_sq";

inline void append_curve_rows(std::ofstream& out, const Trace& trace) {
  for (const auto& rec : trace.records)
    out << rec.t << ',' << trace.seed << ',' << fmt17(rec.grad_norm_sq) << '\n';
}

struct CurveRow {
  std::int64_t t = 0;
  std::uint64_t seed = 0;
  double grad_norm_sq = 0.0;
};

inline std::vector<CurveRow> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCurveCsvHeader)
    throw ParseError(path + ": unexpected curve header");
  std::vector<CurveRow> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != 3) throw ParseError(where + ": expected 3 fields");
    rows.push_back({detail::to_int(f[0], where),
                    static_cast<std::uint64_t>(detail::to_int(f[1], where)),
                    detail::to_double(f[2], where)});
  }
  return rows;
}

inline void write_kv_csv(const std::vector<std::pair<std::string, double>>& rows,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "quantity,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << fmt17(v) << '\n';
  if (!out) throw IoError("short write to " + path);
}

inline std::vector<std::pair<std::string, double>> read_kv_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "quantity,value")
    throw ParseError(path + ": unexpected header");
  std::vector<std::pair<std::string, double>> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != 2) throw ParseError(where + ": expected 2 fields");
    rows.emplace_back(f[0], detail::to_double(f[1], where));
  }
  return rows;
}

inline void write_chunk_csv(const std::vector<double>& sigma, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "k,sigma_sq_k\n";
  for (std::size_t k = 0; k < sigma.size(); ++k) out << k << ',' << fmt17(sigma[k]) << '\n';
  if (!out) throw IoError("short write to " + path);
}

// Plain-text ledger for delay diagnostics on hand-built histories.  Header
// `kind,step,worker,model_index`, then one row per event in order:
//   A,<assign step or -1 for the initial set>,<worker>,<model index>
//   R,<iteration>,<worker>,<model index>
// Receipts bind to the oldest matching unreceived assignment.  T is the
// number of R rows.
inline Trace read_ledger_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "kind,step,worker,model_index")
    throw ParseError(path + ": unexpected ledger header");
  Trace trace;
  trace.snapshot_cadence = 1;
  std::int64_t line_no = 1;
  std::int64_t receipts = 0;
  int max_worker = -1;
  std::vector<int> bursts_at;  // per-step assignment counters
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != 4) throw ParseError(where + ": expected 4 fields");
    const std::int64_t step = detail::to_int(f[1], where);
    const int worker = static_cast<int>(detail::to_int(f[2], where));
    const std::int64_t model = detail::to_int(f[3], where);
    max_worker = std::max(max_worker, worker);
    if (f[0] == "A") {
      if (step < -1) throw ParseError(where + ": bad assign step");
      int pos = 0;
      if (step >= 0) {
        if (static_cast<std::size_t>(step) >= bursts_at.size())
          bursts_at.resize(static_cast<std::size_t>(step) + 1, 0);
        pos = bursts_at[static_cast<std::size_t>(step)]++;
      } else {
        pos = static_cast<int>(trace.jobs.size());
      }
      trace.jobs.push_back({worker, model, step, -1, pos});
    } else if (f[0] == "R") {
      bool bound = false;
      for (auto& job : trace.jobs) {
        if (job.receive_step < 0 && job.worker == worker && job.model_index == model &&
            (job.assign_step < step || job.assign_step < 0)) {
          job.receive_step = step;
          bound = true;
          break;
        }
      }
      if (!bound) throw ParseError(where + ": receipt does not match any in-flight job");
      IterationRecord rec;
      rec.t = step;
      rec.i_t = worker;
      rec.pi_t = model;
      rec.tau_t = step - model;
      if (rec.tau_t < 0) throw ParseError(where + ": negative delay");
      trace.records.push_back(rec);
      ++receipts;
    } else {
      throw ParseError(where + ": kind must be A or R");
    }
  }
  trace.T = receipts;
  trace.n = max_worker + 1;
  for (std::size_t id = 0; id < trace.jobs.size(); ++id) {
    if (trace.jobs[id].receive_step < 0)
      trace.unfinished.push_back(static_cast<std::uint64_t>(id));
  }
  trace.finalized = true;
  return trace;
}

}  // namespace asgrad
