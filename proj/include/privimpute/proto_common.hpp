#pragma once

#include <set>

#include "privimpute/mpc.hpp"
#include "privimpute/psi.hpp"
#include "privimpute/radius_search.hpp"
#include "privimpute/rnn.hpp"

namespace privimpute::proto {

constexpr u8 kTagValue = 0x00;
constexpr u8 kTagBot = 0x01;

// OPPRF input encoding: tag(1) || omega(4 BE) || j(2 BE) || q1(8 BE two's
// complement) || q2(8 BE); bot carries zeroed buckets.
inline Bytes encode_point(u8 tag, u32 omega, u16 j, i64 q1, i64 q2) {
  Bytes out;
  out.push_back(tag);
  put_u32be(out, omega);
  put_u16be(out, j);
  put_i64be(out, q1);
  put_i64be(out, q2);
  return out;
}

inline Bytes encode_value_point(u32 omega, u16 j, const BucketPair& b) {
  return encode_point(kTagValue, omega, j, b.q1, b.q2);
}
inline Bytes encode_bot_point(u32 omega, u16 j) {
  return encode_point(kTagBot, omega, j, 0, 0);
}

// distinct (q1,q2) pairs over the declared value range [lo, hi]: bucket
// pairs are constant on half-radius segments
inline std::vector<BucketPair> bucket_range(i64 lo, i64 hi, i64 r) {
  if (lo > hi) throw ConfigError("bucket range: lo > hi");
  std::vector<BucketPair> out;
  i64 half = r / 2;
  for (i64 k = floor_div(lo, half); k <= floor_div(hi, half); k++)
    out.push_back({q1_bucket(k * half, r), q2_bucket(k * half, r)});
  return out;
}

// per-party session randomness: salts exchanged in the hello, everything
// common (dealer seed, psi salt) derived from their hash
struct SessionSalts {
  u64 mine[2];
  u64 common;

  static SessionSalts exchange(net::Channel& ch, int party, Rng& rng) {
    SessionSalts s;
    s.mine[0] = rng.next();
    s.mine[1] = rng.next();
    Bytes msg;
    put_u64be(msg, s.mine[0]);
    put_u64be(msg, s.mine[1]);
    Bytes buf(16);
    if (party == 0) {
      ch.send_msg(net::MsgType::hello, msg);
      buf = ch.recv_msg(net::MsgType::hello);
    } else {
      buf = ch.recv_msg(net::MsgType::hello);
      ch.send_msg(net::MsgType::hello, msg);
    }
    if (buf.size() != 16) throw ProtocolError("hello: bad salt");
    Bytes all;
    if (party == 0) {
      all = msg;
      all.insert(all.end(), buf.begin(), buf.end());
    } else {
      all = buf;
      all.insert(all.end(), msg.begin(), msg.end());
    }
    s.common = crypto::hash_u64("session-salt", all);
    return s;
  }

  u64 derive(const char* label) const {
    Bytes b;
    put_u64le(b, common);
    return crypto::hash_u64(label, b);
  }
};

// sigma/tau aggregation: sum of per-attribute 128-bit values mod 2^128
inline U128 sum_u128(std::span<const U128> vals) {
  U128 acc{0, 0};
  for (const auto& v : vals) acc += v;
  return acc;
}

enum class Variant {
  h_plain_mean,
  h_plain_random,
  h_blind_mean,
  h_blind_random,
  v_plain,
  v_blind_mean,
  v_blind_random,
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::h_plain_mean: return "plain-mean";
    case Variant::h_plain_random: return "plain-random";
    case Variant::h_blind_mean: return "blind-mean";
    case Variant::h_blind_random: return "blind-random";
    case Variant::v_plain: return "plain";
    case Variant::v_blind_mean: return "blind-mean";
    case Variant::v_blind_random: return "blind-random";
  }
  return "?";
}

// message types each variant may legitimately put on the wire; the leakage
// audit checks observed frame types against this
inline std::set<net::MsgType> allowed_msg_types(Variant v) {
  using net::MsgType;
  std::set<MsgType> base = {MsgType::hello, MsgType::share_input, MsgType::beaver_open,
                            MsgType::bool_open, MsgType::reveal_out, MsgType::no_neighbor};
  switch (v) {
    case Variant::h_plain_mean:
    case Variant::h_plain_random:
      base.insert({MsgType::oprf_query, MsgType::oprf_resp, MsgType::opprf_hints,
                   MsgType::sigma_sums});
      break;
    case Variant::h_blind_mean:
      base.insert({MsgType::oprf_query, MsgType::oprf_resp, MsgType::opprf_hints});
      break;
    case Variant::h_blind_random:
      base.insert({MsgType::oprf_query, MsgType::oprf_resp, MsgType::opprf_hints,
                   MsgType::packing_order});
      break;
    case Variant::v_plain:
      base.insert({MsgType::oprf_query, MsgType::oprf_resp, MsgType::psi_prf_values,
                   MsgType::dh_point});
      break;
    case Variant::v_blind_mean:
    case Variant::v_blind_random:
      base.insert({MsgType::oprf_query, MsgType::oprf_resp, MsgType::opprf_hints});
      break;
  }
  return base;
}

inline void audit_transcript(const net::Channel& ch, Variant v) {
  auto allowed = allowed_msg_types(v);
  for (const auto& f : ch.frame_log())
    if (!allowed.count(f.type))
      throw ProtocolError(std::string("leakage audit: unexpected message type ") +
                          net::msg_type_name(f.type) + " in variant " + variant_name(v));
}

// imputation outcome at Bob
struct ProtoResult {
  std::optional<i64> value;  // nullopt = no-neighbor signal
  bool no_valid_slot = false;
};

}  // namespace privimpute::proto
