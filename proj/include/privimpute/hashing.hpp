#pragma once

#include <sodium.h>

#include <array>
#include <string_view>

#include "privimpute/common.hpp"

namespace privimpute::crypto {

inline void ensure_sodium() {
  static const int ok = sodium_init();
  if (ok < 0) throw Error("libsodium init failed");
}

// BLAKE2b with domain separation tags.
inline Bytes hash_bytes(std::string_view tag, std::span<const u8> data, size_t out_len) {
  ensure_sodium();
  Bytes out(out_len);
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, out_len);
  crypto_generichash_update(&st, reinterpret_cast<const u8*>(tag.data()), tag.size());
  crypto_generichash_update(&st, data.data(), data.size());
  crypto_generichash_final(&st, out.data(), out_len);
  return out;
}

inline U128 hash_u128(std::string_view tag, std::span<const u8> data) {
  Bytes h = hash_bytes(tag, data, 16);
  return {get_u64le(h.data()), get_u64le(h.data() + 8)};
}

inline u64 hash_u64(std::string_view tag, std::span<const u8> data) {
  Bytes h = hash_bytes(tag, data, 8);
  return get_u64le(h.data());
}

// ---- ristretto255 prime-order group ----

struct Scalar {
  std::array<u8, 32> b{};

  static Scalar random(Rng& rng) {
    ensure_sodium();
    u8 wide[64];
    rng.fill(wide, 64);
    Scalar s;
    crypto_core_ristretto255_scalar_reduce(s.b.data(), wide);
    return s;
  }
  Scalar invert() const {
    Scalar r;
    if (crypto_core_ristretto255_scalar_invert(r.b.data(), b.data()) != 0)
      throw Error("scalar not invertible");
    return r;
  }
};

struct GroupElem {
  std::array<u8, 32> b{};

  static GroupElem from_hash(std::string_view tag, std::span<const u8> data) {
    ensure_sodium();
    Bytes h = hash_bytes(tag, data, 64);
    GroupElem g;
    crypto_core_ristretto255_from_hash(g.b.data(), h.data());
    return g;
  }
  GroupElem mul(const Scalar& s) const {
    GroupElem r;
    if (crypto_scalarmult_ristretto255(r.b.data(), s.b.data(), b.data()) != 0)
      throw Error("group element decode failure");
    return r;
  }
  friend bool operator==(const GroupElem& a, const GroupElem& b) { return a.b == b.b; }
  friend bool operator<(const GroupElem& a, const GroupElem& b) { return a.b < b.b; }
};

}  // namespace privimpute::crypto
