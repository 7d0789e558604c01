#pragma once

#include <algorithm>
#include <vector>

#include "privimpute/dataset.hpp"

namespace privimpute {

// Dual quantization of attribute values. q1 buckets have width r starting at
// 0; q2 buckets have width r offset by -r/2, so edges interleave halfway.
// Bucket index = floor((x - offset)/r). Radii must be even and >= 2 so r/2
// is an integer.
struct QuantizationScheme {
  std::vector<i64> radii;

  i64 radius(size_t j) const {
    i64 r = radii.at(j);
    if (r < 2 || r % 2 != 0) throw ConfigError("radius must be even and >= 2");
    return r;
  }
};

struct BucketPair {
  i64 q1, q2;
  friend bool operator==(const BucketPair&, const BucketPair&) = default;
};

inline i64 q1_bucket(i64 x, i64 r) { return floor_div(x, r); }
inline i64 q2_bucket(i64 x, i64 r) { return floor_div(x + r / 2, r); }

inline BucketPair quantize(i64 x, size_t j, const QuantizationScheme& s) {
  i64 r = s.radius(j);
  return {q1_bucket(x, r), q2_bucket(x, r)};
}

namespace detail {

// Nearest other bucket: compare distance to the first value of the bucket
// above (bucket_end - x) against distance to the last value of the bucket
// below (x - bucket_start + 1); ties go to the lower bucket.
inline i64 adjacent_of(i64 x, i64 bucket, i64 r, i64 offset) {
  i64 start = bucket * r + offset;
  i64 up = (start + r) - x;
  i64 down = x - start + 1;
  return up < down ? bucket + 1 : bucket - 1;
}

}  // namespace detail

inline BucketPair adjacent_buckets(i64 x, size_t j, const QuantizationScheme& s) {
  i64 r = s.radius(j);
  return {detail::adjacent_of(x, q1_bucket(x, r), r, 0),
          detail::adjacent_of(x, q2_bucket(x, r), r, -r / 2)};
}

// |a-b| <= r/2 implies a match; a match implies |a-b| <= 3r/2.
inline bool quantized_match(i64 a, i64 b, size_t j, const QuantizationScheme& s) {
  i64 r = s.radius(j);
  return q1_bucket(a, r) == q1_bucket(b, r) || q2_bucket(a, r) == q2_bucket(b, r);
}

// Modified neighbor relation: the candidate's beta attribute must be present
// and every other attribute pair must be missing on either side or bucket-
// matched.
inline bool is_neighbor(const Table& t, size_t alpha, size_t omega, size_t beta,
                        const QuantizationScheme& s) {
  if (!t.has(omega, beta)) return false;
  for (size_t j = 0; j < t.m; j++) {
    if (j == beta) continue;
    if (!t.has(alpha, j) || !t.has(omega, j)) continue;
    if (!quantized_match(t.at(alpha, j), t.at(omega, j), j, s)) return false;
  }
  return true;
}

struct NeighborQuery {
  size_t alpha;
  size_t beta;
};

enum class ImputeMode { mean, random };

struct ImputeResult {
  i64 value = 0;
  bool no_neighbor = false;  // value is the column-mean fallback
  size_t neighbor_count = 0;
};

inline std::vector<size_t> neighbor_rows(const Table& t, const NeighborQuery& q,
                                         const QuantizationScheme& s) {
  std::vector<size_t> out;
  for (size_t w = 0; w < t.n; w++) {
    if (w == q.alpha) continue;
    if (is_neighbor(t, q.alpha, w, q.beta, s)) out.push_back(w);
  }
  return out;
}

// Cleartext r-NN imputation oracle (ground truth for every protocol).
// Random mode draws over the neighbor beta-multiset in (value, row) order.
inline ImputeResult impute_oracle(const Table& t, const NeighborQuery& q,
                                  const QuantizationScheme& s, ImputeMode mode, u64 seed = 0) {
  auto rows = neighbor_rows(t, q, s);
  ImputeResult res;
  res.neighbor_count = rows.size();
  if (rows.empty()) {
    res.no_neighbor = true;
    res.value = t.column_mean_round(q.beta);
    return res;
  }
  if (mode == ImputeMode::mean) {
    i64 sum = 0;
    for (size_t w : rows) sum += t.at(w, q.beta);
    res.value = div_round_ties_away(sum, i64(rows.size()));
  } else {
    std::vector<std::pair<i64, size_t>> vals;
    for (size_t w : rows) vals.push_back({t.at(w, q.beta), w});
    std::sort(vals.begin(), vals.end());
    Rng rng(seed);
    res.value = vals[rng.below(vals.size())].first;
  }
  return res;
}

// k-NN baseline: mean of beta over the k rows nearest in std-normalized
// Euclidean distance on mutually present attributes (beta excluded);
// squared distance rescaled by m/(#used coordinates).
inline ImputeResult knn_impute(const Table& t, const NeighborQuery& q, size_t k) {
  std::vector<double> stds(t.m, 1.0);
  for (size_t j = 0; j < t.m; j++) {
    double sd = t.column_std(j);
    stds[j] = sd > 0 ? sd : 1.0;
  }
  std::vector<std::pair<double, size_t>> dist;
  for (size_t w = 0; w < t.n; w++) {
    if (w == q.alpha || !t.has(w, q.beta)) continue;
    double acc = 0;
    size_t used = 0;
    for (size_t j = 0; j < t.m; j++) {
      if (j == q.beta) continue;
      if (!t.has(q.alpha, j) || !t.has(w, j)) continue;
      double d = (double(t.at(q.alpha, j)) - double(t.at(w, j))) / stds[j];
      acc += d * d;
      used++;
    }
    double d2 = used > 0 ? acc * double(t.m) / double(used)
                         : std::numeric_limits<double>::max();
    dist.push_back({d2, w});
  }
  ImputeResult res;
  if (dist.empty()) {
    res.no_neighbor = true;
    res.value = t.column_mean_round(q.beta);
    return res;
  }
  std::sort(dist.begin(), dist.end());
  size_t take = std::min(k, dist.size());
  i64 sum = 0;
  for (size_t i = 0; i < take; i++) sum += t.at(dist[i].second, q.beta);
  res.neighbor_count = take;
  res.value = div_round_ties_away(sum, i64(take));
  return res;
}

inline double rmse(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw Error("rmse: length mismatch");
  double acc = 0;
  for (size_t i = 0; i < truth.size(); i++) {
    double d = truth[i] - pred[i];
    acc += d * d;
  }
  return std::sqrt(acc / double(truth.size()));
}

}  // namespace privimpute
