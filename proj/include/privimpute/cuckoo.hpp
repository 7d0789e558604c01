#pragma once

#include <algorithm>

#include "privimpute/hashing.hpp"

namespace privimpute::crypto {

struct CuckooParams {
  u32 h = 3;                    // hash-function count
  double expansion = 1.27;      // bins per element
  u32 relocation_limit = 500;   // eviction-chain bound
  u32 rebuild_attempts = 8;     // fresh-seed retries (statistical failure 2^-lambda, lambda=40)
};

struct CuckooFailure : Error {
  using Error::Error;
};

inline u32 cuckoo_bin(std::span<const u8> elem, u64 hash_seed, u32 fn_index, u32 mu) {
  Bytes keyed;
  put_u64le(keyed, hash_seed);
  keyed.push_back(u8(fn_index));
  keyed.insert(keyed.end(), elem.begin(), elem.end());
  return u32(hash_u64("cuckoo", keyed) % mu);
}

// Cuckoo table over byte-string elements; each bin holds at most one
// element, the stash must end empty (rebuild with fresh seeds otherwise).
struct CuckooTable {
  u32 mu = 0;
  u64 hash_seed = 0;
  CuckooParams params;
  std::vector<i64> bins;  // index into the input list, -1 = empty

  bool empty_bin(u32 b) const { return bins[b] < 0; }
};

inline CuckooTable cuckoo_insert_all(const std::vector<Bytes>& items, const CuckooParams& params,
                                     u64 seed) {
  CuckooTable t;
  t.params = params;
  t.mu = u32(std::max<u64>(u64(std::ceil(params.expansion * double(items.size()))), params.h));
  Rng seeder(seed);
  for (u32 attempt = 0; attempt < params.rebuild_attempts; attempt++) {
    t.hash_seed = seeder.next();
    t.bins.assign(t.mu, -1);
    Rng evict_rng(seeder.next());
    bool ok = true;
    for (size_t i = 0; i < items.size() && ok; i++) {
      i64 cur = i64(i);
      u32 budget = params.relocation_limit;
      u32 forced = params.h;  // first insertion may use any empty candidate
      while (true) {
        const Bytes& e = items[size_t(cur)];
        bool placed = false;
        for (u32 f = 0; f < params.h; f++) {
          u32 b = cuckoo_bin(e, t.hash_seed, f, t.mu);
          if (t.bins[b] < 0) {
            t.bins[b] = cur;
            placed = true;
            break;
          }
        }
        if (placed) break;
        if (budget-- == 0) {
          ok = false;
          break;
        }
        u32 f = u32(evict_rng.below(forced));
        u32 b = cuckoo_bin(items[size_t(cur)], t.hash_seed, f, t.mu);
        std::swap(cur, t.bins[b]);
      }
    }
    if (ok) return t;
  }
  throw CuckooFailure("cuckoo build failed after rebuild attempts (statistical failure)");
}

// Simple hashing (all h functions) bin loads for a set of elements.
inline std::vector<u32> simple_hash_loads(const std::vector<Bytes>& items, u64 hash_seed, u32 h,
                                          u32 mu) {
  std::vector<u32> loads(mu, 0);
  for (const auto& e : items)
    for (u32 f = 0; f < h; f++) loads[cuckoo_bin(e, hash_seed, f, mu)]++;
  return loads;
}

// Max per-bin load bound for simple hashing of n elements with h functions
// into mu bins, at statistical security 2^-40: smallest k with the Poisson
// Chernoff tail exp(-lambda) (e*lambda/k)^k <= 2^-40 / mu. Floored by the
// maxima observed in a seeded simulation of the canonical mu = 1.27n shape
// (1e5 trials for n <= 1024, fewer for larger sizes) plus a margin of 8.
inline u32 max_bin_load_bound(size_t n, u32 mu, u32 h = 3) {
  static constexpr std::pair<u64, u32> kObserved[] = {
      {8, 11},     {16, 12},    {32, 14},   {64, 15},    {128, 15},   {256, 15},
      {512, 15},   {1024, 17},  {2048, 16}, {4096, 16},  {8192, 16},  {16384, 17},
      {32768, 16}, {65536, 16}, {131072, 16}, {262144, 17},
  };
  u32 observed = 17;
  for (auto [size, load] : kObserved)
    if (n <= size) {
      observed = load;
      break;
    }
  double lambda = double(h) * double(n) / double(mu);
  double target = 40.0 * std::log(2.0) + std::log(double(mu));  // nats
  u32 k = u32(std::ceil(lambda)) + 1;
  while (k < 4096) {
    double tail = -lambda + double(k) * (1.0 + std::log(lambda / double(k)));
    if (-tail >= target) break;
    k++;
  }
  return std::max(observed + 8, k);
}

}  // namespace privimpute::crypto
