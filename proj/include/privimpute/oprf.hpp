#pragma once

#include "privimpute/gf128.hpp"
#include "privimpute/hashing.hpp"
#include "privimpute/net.hpp"

namespace privimpute::crypto {

// 2HashDH OPRF: F_k(x) = H128(x || H_G(x)^k). The evaluator blinds H_G(x)
// with a fresh exponent, the key holder exponentiates, the evaluator
// unblinds. The key holder learns only the batch size.

struct OprfKey {
  Scalar k;
  static OprfKey random(Rng& rng) { return {Scalar::random(rng)}; }
};

inline U128 oprf_finalize(std::span<const u8> x, const GroupElem& hx_k) {
  Bytes buf(x.begin(), x.end());
  buf.insert(buf.end(), hx_k.b.begin(), hx_k.b.end());
  return hash_u128("oprf-out", buf);
}

// key-holder side: F_k(x) computed locally
inline U128 oprf_eval_local(const OprfKey& key, std::span<const u8> x) {
  return oprf_finalize(x, GroupElem::from_hash("oprf-in", x).mul(key.k));
}

// evaluator side of one batched round trip
inline std::vector<U128> oprf_eval_client(net::Channel& ch, const std::vector<Bytes>& points,
                                          Rng& rng) {
  Scalar rho = Scalar::random(rng);
  Scalar rho_inv = rho.invert();
  Bytes msg;
  put_u32be(msg, u32(points.size()));
  for (const auto& x : points) {
    GroupElem blinded = GroupElem::from_hash("oprf-in", x).mul(rho);
    msg.insert(msg.end(), blinded.b.begin(), blinded.b.end());
  }
  ch.send_msg(net::MsgType::oprf_query, msg);
  Bytes resp = ch.recv_msg(net::MsgType::oprf_resp);
  if (resp.size() != 4 + points.size() * 32) throw ProtocolError("oprf: bad response size");
  std::vector<U128> out(points.size());
  for (size_t i = 0; i < points.size(); i++) {
    GroupElem e;
    std::copy_n(resp.data() + 4 + i * 32, 32, e.b.begin());
    out[i] = oprf_finalize(points[i], e.mul(rho_inv));
  }
  return out;
}

// key-holder side of one batched round trip; returns the batch size served
inline size_t oprf_serve(net::Channel& ch, const OprfKey& key) {
  Bytes msg = ch.recv_msg(net::MsgType::oprf_query);
  if (msg.size() < 4) throw ProtocolError("oprf: bad query");
  u32 count = get_u32be(msg.data());
  if (msg.size() != 4 + u64(count) * 32) throw ProtocolError("oprf: bad query size");
  Bytes resp;
  put_u32be(resp, count);
  for (u32 i = 0; i < count; i++) {
    GroupElem e;
    std::copy_n(msg.data() + 4 + i * 32, 32, e.b.begin());
    GroupElem r = e.mul(key.k);
    resp.insert(resp.end(), r.b.begin(), r.b.end());
  }
  ch.send_msg(net::MsgType::oprf_resp, resp);
  return count;
}

}  // namespace privimpute::crypto
