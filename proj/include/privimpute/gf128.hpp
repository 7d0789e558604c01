#pragma once

#include "privimpute/common.hpp"

#if defined(__x86_64__) && defined(__PCLMUL__)
#include <wmmintrin.h>
#define PRIVIMPUTE_GF128_PCLMUL 1
#endif

namespace privimpute::gf128 {

// GF(2^128) in polynomial basis with reduction x^128 + x^7 + x^2 + x + 1.

inline U128 add(U128 a, U128 b) { return a ^ b; }

// shift-and-xor reference path; the carryless-multiply path must agree
inline U128 mul_generic(U128 a, U128 b) {
  u64 r0 = 0, r1 = 0;
  u64 a0 = a.lo, a1 = a.hi;
  for (int i = 0; i < 128; i++) {
    u64 bit = (i < 64) ? (b.lo >> i) & 1 : (b.hi >> (i - 64)) & 1;
    if (bit) {
      r0 ^= a0;
      r1 ^= a1;
    }
    u64 carry = a1 >> 63;
    a1 = (a1 << 1) | (a0 >> 63);
    a0 <<= 1;
    if (carry) a0 ^= 0x87;  // x^128 = x^7 + x^2 + x + 1
  }
  return {r0, r1};
}

#ifdef PRIVIMPUTE_GF128_PCLMUL
inline U128 mul(U128 a, U128 b) {
  __m128i x = _mm_set_epi64x(i64(a.hi), i64(a.lo));
  __m128i y = _mm_set_epi64x(i64(b.hi), i64(b.lo));
  __m128i t0 = _mm_clmulepi64_si128(x, y, 0x00);
  __m128i t1 = _mm_clmulepi64_si128(x, y, 0x10);
  __m128i t2 = _mm_clmulepi64_si128(x, y, 0x01);
  __m128i t3 = _mm_clmulepi64_si128(x, y, 0x11);
  __m128i mid = _mm_xor_si128(t1, t2);
  __m128i lo = _mm_xor_si128(t0, _mm_slli_si128(mid, 8));
  __m128i hi = _mm_xor_si128(t3, _mm_srli_si128(mid, 8));
  alignas(16) u64 L[2], H[2];
  _mm_store_si128(reinterpret_cast<__m128i*>(L), lo);
  _mm_store_si128(reinterpret_cast<__m128i*>(H), hi);
  u64 r3 = H[1], r2 = H[0], r1 = L[1], r0 = L[0];
  // fold x^192 term into limbs 1..2, then x^128 term into limbs 0..1
  auto fold = [](u64 w, u64& dst_lo, u64& dst_hi) {
    dst_lo ^= w ^ (w << 1) ^ (w << 2) ^ (w << 7);
    dst_hi ^= (w >> 63) ^ (w >> 62) ^ (w >> 57);
  };
  fold(r3, r1, r2);
  fold(r2, r0, r1);
  return {r0, r1};
}
#else
inline U128 mul(U128 a, U128 b) { return mul_generic(a, b); }
#endif

inline U128 inv(U128 a) {
  // a^(2^128 - 2): exponent bits 1..127 set, bit 0 clear
  U128 result{1, 0};
  U128 base = a;
  for (int i = 0; i < 128; i++) {
    if (i != 0) result = mul(result, base);
    base = mul(base, base);
  }
  return result;
}

inline U128 eval(const std::vector<U128>& coeffs, U128 x) {
  U128 acc{0, 0};
  for (size_t i = coeffs.size(); i-- > 0;) acc = add(mul(acc, x), coeffs[i]);
  return acc;
}

// Unique polynomial of degree < n through (xs[i], ys[i]); xs must be
// distinct. O(n^2) via the master polynomial M(x) = prod (x - xs[j]),
// synthetic division for each Lagrange basis, and batch inversion of the
// denominators.
inline std::vector<U128> interpolate(const std::vector<U128>& xs, const std::vector<U128>& ys) {
  size_t n = xs.size();
  if (n == 0) return {};
  if (n == 1) return {ys[0]};

  // M has degree n: coefficients M[0..n]
  std::vector<U128> M(n + 1, U128{0, 0});
  M[0] = U128{1, 0};
  for (size_t j = 0; j < n; j++) {
    for (size_t k = j + 1; k-- > 0;) {
      M[k + 1] = add(M[k + 1], M[k]);    // x * M
      M[k] = mul(M[k], xs[j]);           // + xs[j] * M (subtraction == xor)
    }
  }

  // Q_i = M / (x - xs[i]) by synthetic division; denom_i = Q_i(xs[i])
  std::vector<std::vector<U128>> Q(n, std::vector<U128>(n));
  std::vector<U128> denom(n);
  for (size_t i = 0; i < n; i++) {
    U128 carry = M[n];
    for (size_t k = n; k-- > 0;) {
      Q[i][k] = carry;
      carry = add(M[k], mul(carry, xs[i]));
    }
    denom[i] = eval(Q[i], xs[i]);
    if (denom[i] == U128{0, 0}) throw Error("interpolate: duplicate x-coordinates");
  }

  // batch inversion
  std::vector<U128> prefix(n);
  U128 acc{1, 0};
  for (size_t i = 0; i < n; i++) {
    prefix[i] = acc;
    acc = mul(acc, denom[i]);
  }
  U128 inv_acc = inv(acc);
  std::vector<U128> dinv(n);
  for (size_t i = n; i-- > 0;) {
    dinv[i] = mul(inv_acc, prefix[i]);
    inv_acc = mul(inv_acc, denom[i]);
  }

  std::vector<U128> coeffs(n, U128{0, 0});
  for (size_t i = 0; i < n; i++) {
    U128 w = mul(ys[i], dinv[i]);
    for (size_t k = 0; k < n; k++) coeffs[k] = add(coeffs[k], mul(Q[i][k], w));
  }
  return coeffs;
}

}  // namespace privimpute::gf128
