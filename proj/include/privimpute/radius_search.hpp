#pragma once

#include <fstream>

#include "privimpute/rnn.hpp"

namespace privimpute {

struct RadiusSearchConfig {
  double init_factor = 0.35;
  double decay = 0.9;
  size_t patience = 3;          // consecutive RMSE increases before stopping
  double initial_step_factor = 0.25;  // of the initial radius
  size_t max_iterations = 50;
  double validation_fraction = 0.2;
  u64 seed = 1;
};

struct RadiusSearchResult {
  std::vector<i64> radii;
  std::vector<u8> degenerate;  // per attribute: zero-variance flag
  // evaluation log per attribute: (radius, validation RMSE)
  std::vector<std::vector<std::pair<i64, double>>> log;
};

namespace detail {

inline i64 round_even_radius(double r) {
  i64 v = i64(std::llround(r / 2.0)) * 2;
  return std::max<i64>(v, 2);
}

// validation RMSE of mean-mode r-NN imputation with the given radii,
// masking a seeded MCAR fraction of beta cells on the validation fold
inline double validation_rmse(const Table& t, size_t beta, const QuantizationScheme& s,
                              const std::vector<size_t>& val_rows, double mask_fraction,
                              u64 seed) {
  Rng rng(seed);
  std::vector<size_t> masked;
  for (size_t i : val_rows)
    if (t.has(i, beta) && rng.real01() < mask_fraction) masked.push_back(i);
  if (masked.empty() && !val_rows.empty()) {
    for (size_t i : val_rows)
      if (t.has(i, beta)) {
        masked.push_back(i);
        break;
      }
  }
  if (masked.empty()) return 0.0;
  Table work = t;
  std::vector<double> truth, pred;
  for (size_t i : masked) work.clear_cell(i, beta);
  for (size_t i : masked) {
    auto res = impute_oracle(work, {i, beta}, s, ImputeMode::mean);
    truth.push_back(double(t.at(i, beta)));
    pred.push_back(double(res.value));
  }
  return rmse(truth, pred);
}

}  // namespace detail

// Coordinate hill-climb per attribute j != beta: start at round_even(0.35 *
// std_j), grow by a step that decays 0.9x after each validation-RMSE
// increase, stop after `patience` consecutive increases or max_iterations,
// return the argmin radius seen. Other attributes stay at their
// initialization radii during j's search.
inline RadiusSearchResult search_radii(const Table& train, size_t beta,
                                       const RadiusSearchConfig& cfg) {
  if (train.present_count(beta) < 10)
    throw ConfigError("radius search needs >= 10 rows with the query attribute present");

  RadiusSearchResult res;
  res.radii.assign(train.m, 2);
  res.degenerate.assign(train.m, 0);
  res.log.resize(train.m);

  std::vector<i64> init(train.m, 2);
  for (size_t j = 0; j < train.m; j++) {
    double sd = train.column_std(j);
    if (sd <= 0) {
      res.degenerate[j] = 1;
      init[j] = 2;
    } else {
      init[j] = detail::round_even_radius(cfg.init_factor * sd);
    }
  }

  Rng rng(cfg.seed);
  std::vector<size_t> rows(train.n);
  for (size_t i = 0; i < train.n; i++) rows[i] = i;
  rng.shuffle(rows);
  size_t n_val = std::max<size_t>(1, size_t(cfg.validation_fraction * double(train.n)));
  std::vector<size_t> val_rows(rows.begin(), rows.begin() + n_val);
  u64 mask_seed = rng.next();

  for (size_t j = 0; j < train.m; j++) {
    if (j == beta) {
      res.radii[j] = init[j];
      continue;
    }
    if (res.degenerate[j]) {
      res.radii[j] = 2;
      res.log[j].push_back({2, 0.0});
      continue;
    }
    QuantizationScheme s{init};
    double step = cfg.initial_step_factor * double(init[j]);
    i64 r = init[j];
    i64 best_r = r;
    double best = std::numeric_limits<double>::max();
    double prev = std::numeric_limits<double>::max();
    size_t declines = 0;
    for (size_t it = 0; it < cfg.max_iterations; it++) {
      s.radii[j] = r;
      double e = detail::validation_rmse(train, beta, s, val_rows, 0.10, mask_seed);
      res.log[j].push_back({r, e});
      if (e < best) {
        best = e;
        best_r = r;
      }
      if (it > 0 && e > prev) {
        declines++;
        step *= cfg.decay;
        if (declines >= cfg.patience) break;
      } else if (it > 0) {
        declines = 0;
      }
      prev = e;
      i64 next = detail::round_even_radius(double(r) + step);
      if (next <= r) next = r + 2;  // keep the sequence strictly increasing
      r = next;
    }
    res.radii[j] = best_r;
  }
  return res;
}

// Radii file: CSV "attribute,radius,lo,hi". lo/hi are declared public value
// bounds (scaled integers) consumed by the wildcard OPPRF programming.
struct RadiiFile {
  std::vector<std::string> names;
  std::vector<i64> radii;
  std::vector<std::optional<std::pair<i64, i64>>> bounds;

  QuantizationScheme scheme() const { return {radii}; }
};

inline void save_radii(const RadiiFile& rf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << "attribute,radius,lo,hi\n";
  for (size_t j = 0; j < rf.radii.size(); j++) {
    out << rf.names[j] << "," << rf.radii[j] << ",";
    if (rf.bounds[j]) out << rf.bounds[j]->first;
    out << ",";
    if (rf.bounds[j]) out << rf.bounds[j]->second;
    out << "\n";
  }
}

inline RadiiFile load_radii(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open radii file: " + path);
  RadiiFile rf;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("radii file: empty");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < 2) throw ParseError("radii file: need attribute,radius");
    rf.names.push_back(cells[0]);
    rf.radii.push_back(std::stoll(cells[1]));
    if (cells.size() >= 4 && !cells[2].empty() && !cells[3].empty())
      rf.bounds.push_back(std::make_pair<i64, i64>(std::stoll(cells[2]), std::stoll(cells[3])));
    else
      rf.bounds.push_back(std::nullopt);
  }
  return rf;
}

// Bounds padded by one radius beyond observed values; these are declared
// public metadata.
inline RadiiFile make_radii_file(const Table& t, const std::vector<i64>& radii) {
  RadiiFile rf;
  rf.names = t.names;
  rf.radii = radii;
  for (size_t j = 0; j < t.m; j++) {
    i64 lo = std::numeric_limits<i64>::max(), hi = std::numeric_limits<i64>::min();
    bool any = false;
    for (size_t i = 0; i < t.n; i++)
      if (t.has(i, j)) {
        lo = std::min(lo, t.at(i, j));
        hi = std::max(hi, t.at(i, j));
        any = true;
      }
    if (!any) {
      lo = 0;
      hi = 0;
    }
    rf.bounds.push_back(std::make_pair(lo - radii[j], hi + radii[j]));
  }
  return rf;
}

}  // namespace privimpute
