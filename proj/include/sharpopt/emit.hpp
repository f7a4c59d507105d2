// CSV / JSONL serialization of trajectories and sweep tables.
//
// Trajectory CSV header: step,loss,grad_norm,sharpness,w_0,...,w_{n-1}
// (w columns only when snapshots were recorded). Reals use 17 significant
// digits so a read-back reproduces the doubles exactly.
#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sharpopt/analysis.hpp"
#include "sharpopt/runner.hpp"

namespace sharpopt {

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace emit_detail {

inline std::size_t snapshot_dim(const Trajectory& traj) {
  if (traj.records.empty() || !traj.records.front().w) return 0;
  const std::size_t n = traj.records.front().w->size();
  for (const auto& r : traj.records) {
    if (!r.w || r.w->size() != n) throw UsageError("emit: inconsistent snapshots");
  }
  return n;
}

/// Counts bytes written through it.
class CountingWriter {
 public:
  explicit CountingWriter(std::ostream& out) : out_(out) {}
  void put(const std::string& s) {
    out_ << s;
    bytes_ += s.size();
  }
  std::size_t bytes() const { return bytes_; }
  void check() const {
    if (!out_) throw std::ios_base::failure("write failed");
  }

 private:
  std::ostream& out_;
  std::size_t bytes_ = 0;
};

}  // namespace emit_detail

inline std::string csv_header(std::size_t snapshot_dim) {
  std::string h = "step,loss,grad_norm,sharpness";
  for (std::size_t i = 0; i < snapshot_dim; ++i) h += ",w_" + std::to_string(i);
  return h;
}

/// Returns the number of bytes written.
inline std::size_t write_csv(const Trajectory& traj, std::ostream& out) {
  const std::size_t n = emit_detail::snapshot_dim(traj);
  emit_detail::CountingWriter w(out);
  w.put(csv_header(n) + "\n");
  for (const auto& r : traj.records) {
    std::string line = std::to_string(r.t) + "," + format_real(r.loss) + "," +
                       format_real(r.grad_norm) + "," + (r.sharpness ? format_real(*r.sharpness) : "");
    for (std::size_t i = 0; i < n; ++i) line += "," + format_real((*r.w)[i]);
    w.put(line + "\n");
  }
  out.flush();
  w.check();
  return w.bytes();
}

/// One JSON object per record with the CSV's keys; unset sharpness is null.
inline std::size_t write_jsonl(const Trajectory& traj, std::ostream& out) {
  const std::size_t n = emit_detail::snapshot_dim(traj);
  emit_detail::CountingWriter w(out);
  for (const auto& r : traj.records) {
    std::string line = "{\"step\":" + std::to_string(r.t) + ",\"loss\":" + format_real(r.loss) +
                       ",\"grad_norm\":" + format_real(r.grad_norm) + ",\"sharpness\":" +
                       (r.sharpness ? format_real(*r.sharpness) : "null");
    for (std::size_t i = 0; i < n; ++i) line += ",\"w_" + std::to_string(i) + "\":" + format_real((*r.w)[i]);
    w.put(line + "}\n");
  }
  out.flush();
  w.check();
  return w.bytes();
}

inline std::size_t emit(const Trajectory& traj, OutputFormat format, std::ostream& out) {
  return format == OutputFormat::Csv ? write_csv(traj, out) : write_jsonl(traj, out);
}

/// Parses write_csv output back into records (batches are not serialized).
inline Trajectory read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("read_csv: missing header");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 4 || csv_header(cols.size() - 4) != line) {
    throw UsageError("read_csv: unexpected header '" + line + "'");
  }
  const std::size_t n = cols.size() - 4;
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != cols.size()) throw UsageError("read_csv: wrong field count");
    StepRecord r;
    r.t = std::stoull(f[0]);
    r.loss = std::stod(f[1]);
    r.grad_norm = std::stod(f[2]);
    if (!f[3].empty()) r.sharpness = std::stod(f[3]);
    if (n > 0) {
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = std::stod(f[4 + i]);
      r.w = ParamVector(std::move(w));
    }
    traj.records.push_back(std::move(r));
  }
  return traj;
}

inline std::string sweep_header() {
  return "index,gamma,rho,alpha,seed,status,final_loss,final_grad_norm,lambda_max,minimum,message";
}

inline std::size_t write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  emit_detail::CountingWriter w(out);
  w.put(sweep_header() + "\n");
  for (const auto& r : rows) {
    std::string msg = r.message;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    std::string line = std::to_string(r.index) + "," + format_real(r.gamma) + "," +
                       format_real(r.rho) + "," + format_real(r.alpha) + "," +
                       std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed") + ",";
    line += r.ok ? format_real(r.final_loss) + "," + format_real(r.final_grad_norm) : ",";
    line += ",";
    line += r.lambda_max ? format_real(*r.lambda_max) : "";
    line += ",";
    line += r.minimum ? to_string(*r.minimum) : "";
    line += "," + msg;
    w.put(line + "\n");
  }
  out.flush();
  w.check();
  return w.bytes();
}

}  // namespace sharpopt
