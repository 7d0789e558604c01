#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace privimpute {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

using Bytes = std::vector<u8>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// 128-bit value used for PRF outputs and sigma/tau sums (mod 2^128).
struct U128 {
  u64 lo = 0, hi = 0;

  friend U128 operator^(U128 a, U128 b) { return {a.lo ^ b.lo, a.hi ^ b.hi}; }
  U128& operator^=(U128 b) {
    lo ^= b.lo;
    hi ^= b.hi;
    return *this;
  }
  friend U128 operator+(U128 a, U128 b) {
    U128 r{a.lo + b.lo, a.hi + b.hi};
    if (r.lo < a.lo) r.hi++;
    return r;
  }
  U128& operator+=(U128 b) {
    *this = *this + b;
    return *this;
  }
  friend bool operator==(U128 a, U128 b) { return a.lo == b.lo && a.hi == b.hi; }
  friend bool operator<(U128 a, U128 b) { return a.hi != b.hi ? a.hi < b.hi : a.lo < b.lo; }
};

// --- byte order helpers (wire format is big-endian) ---

inline void put_u32be(Bytes& out, u32 v) {
  out.push_back(u8(v >> 24));
  out.push_back(u8(v >> 16));
  out.push_back(u8(v >> 8));
  out.push_back(u8(v));
}
inline void put_u16be(Bytes& out, u16 v) {
  out.push_back(u8(v >> 8));
  out.push_back(u8(v));
}
inline void put_u64be(Bytes& out, u64 v) {
  put_u32be(out, u32(v >> 32));
  put_u32be(out, u32(v));
}
inline void put_i64be(Bytes& out, i64 v) { put_u64be(out, u64(v)); }

inline u32 get_u32be(const u8* p) {
  return (u32(p[0]) << 24) | (u32(p[1]) << 16) | (u32(p[2]) << 8) | u32(p[3]);
}
inline u64 get_u64be(const u8* p) { return (u64(get_u32be(p)) << 32) | get_u32be(p + 4); }

inline void put_u64le(Bytes& out, u64 v) {
  for (int i = 0; i < 8; i++) out.push_back(u8(v >> (8 * i)));
}
inline u64 get_u64le(const u8* p) {
  u64 v = 0;
  for (int i = 0; i < 8; i++) v |= u64(p[i]) << (8 * i);
  return v;
}

// --- deterministic RNG (splitmix64 core; identical across platforms) ---

struct Rng {
  u64 state;

  explicit Rng(u64 seed = 0x9e3779b97f4a7c15ULL) : state(seed) {}

  u64 next() {
    u64 z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // uniform in [0, n), rejection-sampled
  u64 below(u64 n) {
    if (n == 0) throw Error("Rng::below(0)");
    u64 limit = std::numeric_limits<u64>::max() - std::numeric_limits<u64>::max() % n;
    u64 v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }
  bool bit() { return next() >> 63; }
  double real01() { return double(next() >> 11) * (1.0 / 9007199254740992.0); }  // [0,1)
  double gaussian() {
    // Box-Muller
    double u1 = 0;
    while (u1 == 0) u1 = real01();
    double u2 = real01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  U128 next_u128() { return {next(), next()}; }
  void fill(u8* p, size_t n) {
    size_t i = 0;
    while (i < n) {
      u64 v = next();
      size_t take = std::min<size_t>(8, n - i);
      std::memcpy(p + i, &v, take);
      i += take;
    }
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; i--) std::swap(v[i - 1], v[below(i)]);
  }
  // independent child stream, stable under reordering of other draws
  Rng fork(u64 label) const {
    Rng r(state ^ (label * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    r.next();
    return r;
  }
};

// round to nearest integer, ties away from zero
inline i64 div_round_ties_away(i64 num, i64 den) {
  if (den == 0) throw Error("division by zero");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  if (num >= 0) return (2 * num + den) / (2 * den);
  return -((2 * (-num) + den) / (2 * den));
}

// floor division (negative-safe)
inline i64 floor_div(i64 a, i64 b) {
  i64 q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace privimpute
