#pragma once

#include <map>

#include "privimpute/oprf.hpp"

namespace privimpute::crypto {

// Programmable PRF on top of the OPRF. The programmer interpolates per-bin
// GF(2^128) polynomials over (H'(x), sigma XOR F_k(x)) and publishes them;
// an evaluation is F_k(x) XOR P_bin(H'(x)). Programmed points evaluate to
// their targets, everything else stays pseudorandom, and the evaluator
// cannot tell whether a point was programmed (all bins are padded to a
// uniform load with random filler).
struct OpprfProgram {
  u32 bins = 1;
  u32 load = 0;
  u64 bin_seed = 0;
  std::vector<U128> coeffs;  // bins * load, bin-major

  Bytes serialize() const {
    Bytes out;
    put_u32be(out, bins);
    put_u32be(out, load);
    put_u64be(out, bin_seed);
    for (const auto& c : coeffs) {
      put_u64be(out, c.lo);
      put_u64be(out, c.hi);
    }
    return out;
  }
  static OpprfProgram deserialize(std::span<const u8> in) {
    if (in.size() < 16) throw ProtocolError("opprf: truncated program");
    OpprfProgram p;
    p.bins = get_u32be(in.data());
    p.load = get_u32be(in.data() + 4);
    p.bin_seed = get_u64be(in.data() + 8);
    u64 want = 16 + u64(p.bins) * p.load * 16;
    if (in.size() != want) throw ProtocolError("opprf: bad program size");
    p.coeffs.resize(size_t(p.bins) * p.load);
    for (size_t i = 0; i < p.coeffs.size(); i++) {
      p.coeffs[i].lo = get_u64be(in.data() + 16 + i * 16);
      p.coeffs[i].hi = get_u64be(in.data() + 16 + i * 16 + 8);
    }
    return p;
  }
};

namespace detail {

inline U128 opprf_digest(std::span<const u8> point) { return hash_u128("opprf-x", point); }

inline u32 opprf_bin(std::span<const u8> point, u64 bin_seed, u32 bins) {
  Bytes keyed;
  put_u64le(keyed, bin_seed);
  keyed.insert(keyed.end(), point.begin(), point.end());
  return u32(hash_u64("opprf-bin", keyed) % bins);
}

inline u32 next_pow2_u32(u64 v) {
  u32 p = 1;
  while (p < v && p < (1u << 30)) p <<= 1;
  return p;
}

}  // namespace detail

inline constexpr u32 kOpprfTargetLoad = 16;

// Build the hint structure for a set of (point, target) pairs. Duplicate
// points with equal targets are deduplicated; conflicting targets error.
inline OpprfProgram opprf_program(const OprfKey& key,
                                  const std::vector<std::pair<Bytes, U128>>& points, Rng& rng) {
  OpprfProgram prog;
  prog.bins = detail::next_pow2_u32((points.size() + kOpprfTargetLoad - 1) / kOpprfTargetLoad);
  prog.bin_seed = rng.next();

  struct Entry {
    U128 x, y;
  };
  std::vector<std::vector<Entry>> bin_pts(prog.bins);
  std::vector<std::map<std::pair<u64, u64>, U128>> seen(prog.bins);
  for (const auto& [pt, target] : points) {
    U128 d = detail::opprf_digest(pt);
    u32 b = detail::opprf_bin(pt, prog.bin_seed, prog.bins);
    auto k2 = std::make_pair(d.lo, d.hi);
    auto it = seen[b].find(k2);
    if (it != seen[b].end()) {
      if (!(it->second == target))
        throw ConfigError("opprf: duplicate input points with conflicting outputs");
      continue;
    }
    seen[b].emplace(k2, target);
    U128 mask = oprf_eval_local(key, pt);
    bin_pts[b].push_back({d, target ^ mask});
  }

  u32 max_load = 1;
  for (const auto& v : bin_pts) max_load = std::max<u32>(max_load, u32(v.size()));
  prog.load = max_load;

  prog.coeffs.assign(size_t(prog.bins) * prog.load, U128{0, 0});
  std::vector<U128> xs, ys;
  for (u32 b = 0; b < prog.bins; b++) {
    xs.clear();
    ys.clear();
    for (const auto& e : bin_pts[b]) {
      xs.push_back(e.x);
      ys.push_back(e.y);
    }
    while (xs.size() < prog.load) {
      U128 rx = rng.next_u128();
      bool dup = false;
      for (const auto& x : xs) dup |= (x == rx);
      if (dup) continue;
      xs.push_back(rx);
      ys.push_back(rng.next_u128());
    }
    auto coeffs = gf128::interpolate(xs, ys);
    for (size_t k = 0; k < coeffs.size(); k++) prog.coeffs[size_t(b) * prog.load + k] = coeffs[k];
  }
  return prog;
}

// evaluator side: combine the OPRF value with the published hints
inline U128 opprf_finish(const OpprfProgram& prog, std::span<const u8> point, U128 prf_value) {
  U128 d = detail::opprf_digest(point);
  u32 b = detail::opprf_bin(point, prog.bin_seed, prog.bins);
  U128 acc{0, 0};
  const U128* c = prog.coeffs.data() + size_t(b) * prog.load;
  for (size_t i = prog.load; i-- > 0;) acc = gf128::add(gf128::mul(acc, d), c[i]);
  return prf_value ^ acc;
}

// single-process evaluation (tests and local oracles)
inline U128 opprf_eval_local(const OprfKey& key, const OpprfProgram& prog,
                             std::span<const u8> point) {
  return opprf_finish(prog, point, oprf_eval_local(key, point));
}

// two-party batched evaluation: Bob programs and serves, Alice evaluates
inline void opprf_send_program(net::Channel& ch, const OpprfProgram& prog) {
  ch.send_msg(net::MsgType::opprf_hints, prog.serialize());
}
inline OpprfProgram opprf_recv_program(net::Channel& ch) {
  return OpprfProgram::deserialize(ch.recv_msg(net::MsgType::opprf_hints));
}

inline std::vector<U128> opprf_eval_client(net::Channel& ch, const OpprfProgram& prog,
                                           const std::vector<Bytes>& points, Rng& rng) {
  std::vector<U128> prf = oprf_eval_client(ch, points, rng);
  std::vector<U128> out(points.size());
  for (size_t i = 0; i < points.size(); i++) out[i] = opprf_finish(prog, points[i], prf[i]);
  return out;
}

}  // namespace privimpute::crypto
