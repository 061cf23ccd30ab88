#pragma once

// CSV and JSON artifacts of the experiment harness.

#include <cerrno>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/lair/importance.hpp"
#include "condsamp/lair/lair.hpp"
#include "condsamp/samplers/chain.hpp"

namespace condsamp {

/// Shortest-roundtrip-safe text form of a double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes `contents` to a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

/// Row-oriented CSV builder.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : cols_(header.size()) { row_strings(header); }

  CsvWriter& cell(double v) { return put(fmt_double(v)); }
  CsvWriter& cell(std::size_t v) { return put(std::to_string(v)); }
  CsvWriter& cell(int v) { return put(std::to_string(v)); }
  CsvWriter& cell(bool v) { return put(v ? "1" : "0"); }
  CsvWriter& cell(const std::string& v) { return put(v); }
  CsvWriter& cells(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) cell(v[i]);
    return *this;
  }
  void end_row() {
    if (in_row_ != cols_)
      throw UsageError("CSV row has " + std::to_string(in_row_) + " cells, header has " + std::to_string(cols_));
    buf_ += '\n';
    in_row_ = 0;
  }

  [[nodiscard]] const std::string& str() const { return buf_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) put(c);
    end_row();
  }
  CsvWriter& put(const std::string& s) {
    if (in_row_ > 0) buf_ += ',';
    buf_ += s;
    ++in_row_;
    return *this;
  }

  std::size_t cols_;
  std::size_t in_row_ = 0;
  std::string buf_;
};

inline std::vector<std::string> indexed_columns(const std::string& prefix, const std::vector<std::size_t>& ids) {
  std::vector<std::string> out;
  for (std::size_t i : ids) out.push_back(prefix + std::to_string(i));
  return out;
}

inline std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

/// Chain trace: chain_id, t, accepted, log_accept_ratio, z_<j>, xmis_<coord>.
inline std::string chain_trace_csv(const ChainTrace& trace, const MaskedPoint& point, std::size_t latent_dim,
                                   std::size_t chain_id = 0) {
  std::vector<std::string> header{"chain_id", "t", "accepted", "log_accept_ratio"};
  for (auto& c : indexed_columns("z_", iota_ids(latent_dim))) header.push_back(c);
  for (auto& c : indexed_columns("xmis_", point.missing_indices())) header.push_back(c);
  CsvWriter w(header);
  for (const auto& r : trace.records) {
    w.cell(chain_id).cell(r.t).cell(r.accepted).cell(r.log_accept_ratio).cells(r.z).cells(r.x_mis);
    w.end_row();
  }
  return w.str();
}

/// LAIR output: sample_id, source_t, source_k, z_<j>, xmis_<coord>.
inline std::string lair_samples_csv(const std::vector<LairSample>& samples, const MaskedPoint& point,
                                    std::size_t latent_dim) {
  std::vector<std::string> header{"sample_id", "source_t", "source_k"};
  for (auto& c : indexed_columns("z_", iota_ids(latent_dim))) header.push_back(c);
  for (auto& c : indexed_columns("xmis_", point.missing_indices())) header.push_back(c);
  CsvWriter w(header);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    w.cell(i).cell(samples[i].source_t).cell(samples[i].source_k).cells(samples[i].z).cells(samples[i].x_mis);
    w.end_row();
  }
  return w.str();
}

/// Importance-resampling output: sample_id, source_index, log_weight, z_<j>, xmis_<coord>.
inline std::string ir_samples_csv(const IrResult& ir, const MaskedPoint& point, std::size_t latent_dim) {
  std::vector<std::string> header{"sample_id", "source_index", "log_weight"};
  for (auto& c : indexed_columns("z_", iota_ids(latent_dim))) header.push_back(c);
  for (auto& c : indexed_columns("xmis_", point.missing_indices())) header.push_back(c);
  CsvWriter w(header);
  for (std::size_t i = 0; i < ir.imputations.size(); ++i) {
    const std::size_t src = ir.indices[i];
    w.cell(i).cell(src).cell(ir.log_weights[src]).cells(ir.latents[i]).cells(ir.imputations[i]);
    w.end_row();
  }
  return w.str();
}

/// LAIR archive: t, k, is_prior_component, log_weight, z_<j>.
inline std::string archive_csv(const ParticleArchive& archive, std::size_t latent_dim) {
  std::vector<std::string> header{"t", "k", "is_prior_component", "log_weight"};
  for (auto& c : indexed_columns("z_", iota_ids(latent_dim))) header.push_back(c);
  CsvWriter w(header);
  for (const auto& e : archive.entries()) {
    w.cell(e.t).cell(e.k).cell(e.is_prior).cell(e.log_weight).cells(e.z);
    w.end_row();
  }
  return w.str();
}

/// Parsed numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] std::ptrdiff_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw UsageError("'" + path.string() + "' is empty");
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size())
        throw UsageError(path.string() + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Columns named `<prefix><id>` in header order, as (id, column index).
inline std::vector<std::pair<std::size_t, std::size_t>> prefixed_columns(const CsvTable& t, std::string_view prefix) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const std::string& h = t.header[i];
    if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0)
      out.emplace_back(std::stoul(h.substr(prefix.size())), i);
  }
  return out;
}

/// Piecewise-linear density of one coordinate read from an oracle table.
/// Bin masses integrate the interpolant exactly.
class TabulatedDensity {
 public:
  TabulatedDensity(std::vector<double> x, std::vector<double> density) : x_(std::move(x)), d_(std::move(density)) {
    if (x_.size() < 2 || x_.size() != d_.size()) throw UsageError("tabulated density needs >= 2 nodes");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1])) throw UsageError("tabulated density nodes must increase strictly");
    double total = 0.0;
    for (std::size_t i = 1; i < x_.size(); ++i) total += 0.5 * (d_[i] + d_[i - 1]) * (x_[i] - x_[i - 1]);
    if (!(total > 0.0)) throw UsageError("tabulated density has no mass");
    for (double& v : d_) v /= total;
  }

  [[nodiscard]] std::pair<double, double> domain() const { return {x_.front(), x_.back()}; }

  [[nodiscard]] std::vector<double> bin_masses(double lo, double hi, std::size_t bins) const {
    std::vector<double> out(bins);
    const double w = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) out[b] = cdf(lo + w * static_cast<double>(b + 1)) - cdf(lo + w * static_cast<double>(b));
    return out;
  }

  [[nodiscard]] double cdf(double t) const {
    if (t <= x_.front()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 1; i < x_.size(); ++i) {
      const double a = x_[i - 1], b = x_[i];
      if (t >= b) {
        acc += 0.5 * (d_[i - 1] + d_[i]) * (b - a);
        continue;
      }
      const double s = (t - a) / (b - a);
      const double dt = d_[i - 1] + s * (d_[i] - d_[i - 1]);
      acc += 0.5 * (d_[i - 1] + dt) * (t - a);
      break;
    }
    return acc;
  }

 private:
  std::vector<double> x_;
  std::vector<double> d_;
};

/// Per-coordinate densities from an oracle `*.xmis.csv` (columns coord, x_mis, density).
inline std::map<std::size_t, TabulatedDensity> read_oracle_xmis(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto ci = t.column("coord"), xi = t.column("x_mis"), di = t.column("density");
  if (ci < 0 || xi < 0 || di < 0) throw UsageError("'" + path.string() + "' needs columns coord, x_mis, density");
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> cols;
  for (const auto& r : t.rows) {
    auto& [xs, ds] = cols[static_cast<std::size_t>(r[static_cast<std::size_t>(ci)])];
    xs.push_back(r[static_cast<std::size_t>(xi)]);
    ds.push_back(r[static_cast<std::size_t>(di)]);
  }
  std::map<std::size_t, TabulatedDensity> out;
  for (auto& [c, v] : cols) out.emplace(c, TabulatedDensity(std::move(v.first), std::move(v.second)));
  return out;
}

inline std::uint64_t fnv1a_hash(std::string_view s) { return fnv1a64(s); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace condsamp
