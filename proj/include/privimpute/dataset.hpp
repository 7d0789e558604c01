#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "privimpute/common.hpp"

namespace privimpute {

enum class AttrKind { numerical, categorical };

// Relational table with optional cells. Numeric attributes are stored as
// fixed-point scaled integers; categorical attributes are dictionary-encoded
// (the dictionary is public metadata).
struct Table {
  size_t n = 0, m = 0;
  i64 scale = 1000;
  int value_bits = 32;
  std::vector<i64> vals;        // n*m row-major
  std::vector<u8> present;      // n*m
  std::vector<AttrKind> kinds;
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> dicts;  // per categorical attribute

  bool has(size_t i, size_t j) const { return present[i * m + j] != 0; }
  i64 at(size_t i, size_t j) const { return vals[i * m + j]; }
  void set(size_t i, size_t j, i64 v) {
    vals[i * m + j] = v;
    present[i * m + j] = 1;
  }
  void clear_cell(size_t i, size_t j) {
    vals[i * m + j] = 0;
    present[i * m + j] = 0;
  }
  size_t present_count(size_t j) const {
    size_t c = 0;
    for (size_t i = 0; i < n; i++) c += has(i, j);
    return c;
  }
  double column_std(size_t j) const {
    double s = 0, s2 = 0;
    size_t c = 0;
    for (size_t i = 0; i < n; i++)
      if (has(i, j)) {
        double v = double(at(i, j));
        s += v;
        s2 += v * v;
        c++;
      }
    if (c == 0) return 0.0;
    double mean = s / double(c);
    double var = s2 / double(c) - mean * mean;
    return var > 0 ? std::sqrt(var) : 0.0;
  }
  i64 column_mean_round(size_t j) const {
    i64 s = 0;
    i64 c = 0;
    for (size_t i = 0; i < n; i++)
      if (has(i, j)) {
        s += at(i, j);
        c++;
      }
    if (c == 0) throw Error("column has no present values");
    return div_round_ties_away(s, c);
  }
};

enum class MissPattern { MCAR, MAR, MNAR };

struct MissingnessSpec {
  MissPattern pattern = MissPattern::MCAR;
  double fraction = 0.10;  // in (0,1]
  size_t target_column = 0;
  // MAR/MNAR: percentile interval; when unset, drawn seeded
  std::optional<std::pair<double, double>> percentile_bounds;
  size_t driver_column = 0;  // MAR only
  u64 seed = 1;
};

struct SplitSpec {
  enum class Mode { horizontal, vertical } mode = Mode::horizontal;
  double alice_share = 0.5;  // horizontal: fraction of tuples
  size_t m_alice = 0;        // vertical: Alice gets columns [0, m_alice)
  u64 seed = 1;
};

namespace detail {

inline bool parse_decimal(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Load a comma-delimited table with a header row. Empty cells are missing.
// Columns where every non-empty cell parses as a decimal are numerical and
// get scaled to fixed point; the rest are dictionary-encoded categoricals.
inline Table load_table_stream(std::istream& in, i64 scale, int value_bits = 32) {
  Table t;
  t.scale = scale;
  t.value_bits = value_bits;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("no rows");
  for (auto& name : detail::split_csv_line(line)) t.names.push_back(detail::trim(name));
  t.m = t.names.size();
  if (t.m < 2) throw ParseError("need at least 2 columns");

  std::vector<std::vector<std::string>> raw;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.m) {
      std::ostringstream os;
      os << "row " << raw.size() + 2 << ": expected " << t.m << " cells, got " << cells.size();
      throw ParseError(os.str());
    }
    raw.push_back(std::move(cells));
  }
  t.n = raw.size();
  if (t.n == 0) throw ParseError("no rows");

  t.kinds.assign(t.m, AttrKind::numerical);
  for (size_t j = 0; j < t.m; j++) {
    for (size_t i = 0; i < t.n; i++) {
      const std::string c = detail::trim(raw[i][j]);
      double v;
      if (!c.empty() && !detail::parse_decimal(c, &v)) {
        t.kinds[j] = AttrKind::categorical;
        break;
      }
    }
  }

  t.vals.assign(t.n * t.m, 0);
  t.present.assign(t.n * t.m, 0);
  t.dicts.resize(t.m);
  const i64 max_abs = (i64(1) << (value_bits - 1)) - 1;
  std::vector<std::map<std::string, i64>> dict_idx(t.m);

  for (size_t i = 0; i < t.n; i++) {
    for (size_t j = 0; j < t.m; j++) {
      const std::string c = detail::trim(raw[i][j]);
      if (c.empty()) continue;
      i64 enc;
      if (t.kinds[j] == AttrKind::numerical) {
        double v = 0;
        detail::parse_decimal(c, &v);
        double scaled = v * double(scale);
        if (std::abs(scaled) > double(max_abs)) {
          std::ostringstream os;
          os << "overflow at row " << i + 2 << ", column '" << t.names[j] << "': " << c
             << " does not fit " << value_bits << " bits at scale " << scale;
          throw ParseError(os.str());
        }
        enc = i64(std::llround(scaled));
      } else {
        auto [it, inserted] = dict_idx[j].try_emplace(c, i64(t.dicts[j].size()));
        if (inserted) t.dicts[j].push_back(c);
        enc = it->second;
      }
      t.set(i, j, enc);
    }
  }
  return t;
}

inline Table load_table(const std::string& path, i64 scale, int value_bits = 32) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return load_table_stream(in, scale, value_bits);
}

inline void save_table_stream(const Table& t, std::ostream& out) {
  for (size_t j = 0; j < t.m; j++) out << (j ? "," : "") << t.names[j];
  out << "\n";
  for (size_t i = 0; i < t.n; i++) {
    for (size_t j = 0; j < t.m; j++) {
      if (j) out << ",";
      if (!t.has(i, j)) continue;
      if (t.kinds[j] == AttrKind::categorical) {
        out << t.dicts[j][size_t(t.at(i, j))];
      } else {
        double v = double(t.at(i, j)) / double(t.scale);
        std::ostringstream os;
        os.precision(12);
        os << v;
        out << os.str();
      }
    }
    out << "\n";
  }
}

inline void save_table(const Table& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  save_table_stream(t, out);
}

struct GroundTruth {
  std::vector<std::pair<size_t, i64>> dropped;  // (row, original scaled value)
};

inline void save_ground_truth(const GroundTruth& gt, i64 scale, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << "row_index,value\n";
  for (auto& [row, v] : gt.dropped) {
    std::ostringstream os;
    os.precision(12);
    os << double(v) / double(scale);
    out << row << "," << os.str() << "\n";
  }
}

namespace detail {

// candidate rows whose keyed value lies in [pct_lo, pct_hi) of the key
// column's present-value distribution (nearest-rank thresholds)
inline std::vector<size_t> percentile_window_rows(const Table& t, size_t key_col, double pct_lo,
                                                  double pct_hi,
                                                  const std::vector<size_t>& rows) {
  std::vector<i64> sorted;
  for (size_t i = 0; i < t.n; i++)
    if (t.has(i, key_col)) sorted.push_back(t.at(i, key_col));
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty()) return {};
  auto threshold = [&](double p) -> std::optional<i64> {
    size_t idx = size_t(std::floor(p / 100.0 * double(sorted.size())));
    if (idx >= sorted.size()) return std::nullopt;  // +infinity
    return sorted[idx];
  };
  auto lo = threshold(pct_lo);
  auto hi = threshold(pct_hi);
  std::vector<size_t> out;
  for (size_t i : rows) {
    if (!t.has(i, key_col)) continue;
    i64 v = t.at(i, key_col);
    if (lo && v < *lo) continue;
    if (hi && v >= *hi) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace detail

// Drop cells of the target column per the missingness spec; returns the
// corrupted table and the dropped cells as ground truth.
inline std::pair<Table, GroundTruth> inject_missing(const Table& t, const MissingnessSpec& spec) {
  if (spec.fraction <= 0.0 || spec.fraction > 1.0)
    throw ConfigError("missingness fraction must be in (0,1]");
  if (spec.target_column >= t.m) throw ConfigError("target column out of range");
  if (spec.pattern == MissPattern::MAR && spec.driver_column == spec.target_column)
    throw ConfigError("MAR driver column must differ from target column");

  std::vector<size_t> present_rows;
  for (size_t i = 0; i < t.n; i++)
    if (t.has(i, spec.target_column)) present_rows.push_back(i);
  if (present_rows.empty()) throw ConfigError("target column has no present values");

  Rng rng(spec.seed);
  std::vector<size_t> to_drop;

  if (spec.pattern == MissPattern::MCAR) {
    for (size_t i : present_rows)
      if (rng.real01() < spec.fraction) to_drop.push_back(i);
  } else {
    double lo, hi;
    if (spec.percentile_bounds) {
      lo = spec.percentile_bounds->first;
      hi = spec.percentile_bounds->second;
    } else {
      do {
        lo = rng.real01() * 100.0;
        hi = rng.real01() * 100.0;
      } while (lo == hi);
      if (lo > hi) std::swap(lo, hi);
    }
    if (!(lo < hi)) throw ConfigError("percentile bounds: lower must be < upper");
    size_t key_col = spec.pattern == MissPattern::MAR ? spec.driver_column : spec.target_column;
    if (key_col >= t.m) throw ConfigError("driver column out of range");
    auto candidates = detail::percentile_window_rows(t, key_col, lo, hi, present_rows);
    if (candidates.empty())
      throw ConfigError("percentile interval matched no rows; re-seed or widen bounds");
    size_t want = size_t(std::llround(spec.fraction * double(present_rows.size())));
    if (want == 0) want = 1;
    rng.shuffle(candidates);
    size_t take = std::min(want, candidates.size());
    to_drop.assign(candidates.begin(), candidates.begin() + take);
  }

  Table out = t;
  GroundTruth gt;
  std::sort(to_drop.begin(), to_drop.end());
  for (size_t i : to_drop) {
    gt.dropped.push_back({i, t.at(i, spec.target_column)});
    out.clear_cell(i, spec.target_column);
  }
  return {out, gt};
}

// Partition a table between Alice and Bob. Horizontal: seeded row shuffle
// then prefix/suffix. Vertical: column cut at m_alice, shared row order is
// the common identifier.
struct SplitResult {
  Table alice, bob;
  std::vector<size_t> alice_rows, bob_rows;  // horizontal: original row ids
};

inline Table select_rows(const Table& t, const std::vector<size_t>& rows) {
  Table v;
  v.n = rows.size();
  v.m = t.m;
  v.scale = t.scale;
  v.value_bits = t.value_bits;
  v.kinds = t.kinds;
  v.names = t.names;
  v.dicts = t.dicts;
  v.vals.assign(v.n * v.m, 0);
  v.present.assign(v.n * v.m, 0);
  for (size_t r = 0; r < rows.size(); r++)
    for (size_t j = 0; j < t.m; j++)
      if (t.has(rows[r], j)) v.set(r, j, t.at(rows[r], j));
  return v;
}

inline Table select_cols(const Table& t, size_t col_begin, size_t col_end) {
  Table v;
  v.n = t.n;
  v.m = col_end - col_begin;
  v.scale = t.scale;
  v.value_bits = t.value_bits;
  v.kinds.assign(t.kinds.begin() + col_begin, t.kinds.begin() + col_end);
  v.names.assign(t.names.begin() + col_begin, t.names.begin() + col_end);
  v.dicts.assign(t.dicts.begin() + col_begin, t.dicts.begin() + col_end);
  v.vals.assign(v.n * v.m, 0);
  v.present.assign(v.n * v.m, 0);
  for (size_t i = 0; i < t.n; i++)
    for (size_t j = col_begin; j < col_end; j++)
      if (t.has(i, j)) v.set(i, j - col_begin, t.at(i, j));
  return v;
}

inline SplitResult split(const Table& t, const SplitSpec& spec, size_t beta = SIZE_MAX) {
  SplitResult res;
  if (spec.mode == SplitSpec::Mode::horizontal) {
    size_t n_a = size_t(std::llround(spec.alice_share * double(t.n)));
    if (n_a == 0 || n_a >= t.n) throw ConfigError("horizontal split: need 0 < n_A < n");
    std::vector<size_t> order(t.n);
    for (size_t i = 0; i < t.n; i++) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);
    res.alice_rows.assign(order.begin(), order.begin() + n_a);
    res.bob_rows.assign(order.begin() + n_a, order.end());
    res.alice = select_rows(t, res.alice_rows);
    res.bob = select_rows(t, res.bob_rows);
  } else {
    size_t m_a = spec.m_alice;
    if (m_a == 0 || m_a >= t.m) throw ConfigError("vertical split: need 0 < m_A < m");
    if (beta != SIZE_MAX && beta < m_a)
      throw ConfigError("vertical split: imputed attribute must lie on Bob's side");
    res.alice = select_cols(t, 0, m_a);
    res.bob = select_cols(t, m_a, t.m);
  }
  return res;
}

}  // namespace privimpute
