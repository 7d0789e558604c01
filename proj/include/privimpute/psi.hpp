#pragma once

#include <set>

#include "privimpute/cuckoo.hpp"
#include "privimpute/opprf.hpp"

namespace privimpute::crypto {

// ---- plain PSI (OPRF-based): receiver learns the intersection, sender
// learns only the receiver's padded set size ----

inline void psi_plain_sender(net::Channel& ch, const std::vector<Bytes>& my_set, Rng& rng) {
  OprfKey key = OprfKey::random(rng);
  oprf_serve(ch, key);
  std::vector<U128> mine;
  mine.reserve(my_set.size());
  for (const auto& e : my_set) mine.push_back(oprf_eval_local(key, e));
  std::sort(mine.begin(), mine.end());  // hide input order
  Bytes msg;
  put_u32be(msg, u32(mine.size()));
  for (const auto& v : mine) {
    put_u64be(msg, v.lo);
    put_u64be(msg, v.hi);
  }
  ch.send_msg(net::MsgType::psi_prf_values, msg);
}

// returns indices into my_set
inline std::vector<size_t> psi_plain_receiver(net::Channel& ch, const std::vector<Bytes>& my_set,
                                              Rng& rng) {
  std::vector<U128> mine = oprf_eval_client(ch, my_set, rng);
  Bytes msg = ch.recv_msg(net::MsgType::psi_prf_values);
  if (msg.size() < 4) throw ProtocolError("psi: bad sender list");
  u32 count = get_u32be(msg.data());
  if (msg.size() != 4 + u64(count) * 16) throw ProtocolError("psi: bad sender list size");
  std::set<std::pair<u64, u64>> theirs;
  for (u32 i = 0; i < count; i++)
    theirs.insert({get_u64be(msg.data() + 4 + i * 16), get_u64be(msg.data() + 4 + i * 16 + 8)});
  std::vector<size_t> out;
  for (size_t i = 0; i < my_set.size(); i++)
    if (theirs.count({mine[i].lo, mine[i].hi})) out.push_back(i);
  return out;
}

// ---- DH-PSI backend: H(m)^{ab} matching ----

inline void dh_psi_sender(net::Channel& ch, const std::vector<Bytes>& my_set, Rng& rng) {
  Scalar a = Scalar::random(rng);
  // step 1: send H(x)^a for my set, shuffled
  std::vector<GroupElem> mine;
  mine.reserve(my_set.size());
  for (const auto& e : my_set) mine.push_back(GroupElem::from_hash("dh-psi", e).mul(a));
  std::vector<size_t> order(mine.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = i;
  rng.shuffle(order);
  Bytes msg;
  put_u32be(msg, u32(mine.size()));
  for (size_t i : order) msg.insert(msg.end(), mine[i].b.begin(), mine[i].b.end());
  ch.send_msg(net::MsgType::dh_point, msg);
  // step 2: receive H(y)^b, return (H(y)^b)^a in order
  Bytes theirs = ch.recv_msg(net::MsgType::dh_point);
  u32 count = get_u32be(theirs.data());
  Bytes resp;
  put_u32be(resp, count);
  for (u32 i = 0; i < count; i++) {
    GroupElem e;
    std::copy_n(theirs.data() + 4 + i * 32, 32, e.b.begin());
    GroupElem r = e.mul(a);
    resp.insert(resp.end(), r.b.begin(), r.b.end());
  }
  ch.send_msg(net::MsgType::dh_point, resp);
}

inline std::vector<size_t> dh_psi_receiver(net::Channel& ch, const std::vector<Bytes>& my_set,
                                           Rng& rng) {
  Scalar b = Scalar::random(rng);
  Bytes alice_pts = ch.recv_msg(net::MsgType::dh_point);
  if (alice_pts.size() < 4) throw ProtocolError("dh-psi: bad message");
  u32 na = get_u32be(alice_pts.data());
  if (alice_pts.size() != 4 + u64(na) * 32) throw ProtocolError("dh-psi: bad message size");

  Bytes msg;
  put_u32be(msg, u32(my_set.size()));
  for (const auto& e : my_set) {
    GroupElem g = GroupElem::from_hash("dh-psi", e).mul(b);
    msg.insert(msg.end(), g.b.begin(), g.b.end());
  }
  ch.send_msg(net::MsgType::dh_point, msg);

  // H(x_i)^{ab} from Alice's first message
  std::set<std::array<u8, 32>> theirs;
  for (u32 i = 0; i < na; i++) {
    GroupElem e;
    std::copy_n(alice_pts.data() + 4 + i * 32, 32, e.b.begin());
    theirs.insert(e.mul(b).b);
  }

  Bytes back = ch.recv_msg(net::MsgType::dh_point);
  u32 nb = get_u32be(back.data());
  if (nb != my_set.size() || back.size() != 4 + u64(nb) * 32)
    throw ProtocolError("dh-psi: bad response size");
  std::vector<size_t> out;
  for (u32 i = 0; i < nb; i++) {
    std::array<u8, 32> v;
    std::copy_n(back.data() + 4 + i * 32, 32, v.begin());
    if (theirs.count(v)) out.push_back(i);
  }
  return out;
}

// ---- circuit PSI: per-bin 128-bit values on both sides; equal iff Bob's
// bin element is in Alice's set. Bob cuckoo-hashes and evaluates, Alice
// replicates, programs one random value per bin, and holds that value. ----

constexpr u8 kPsiElemTag = 0x02;
constexpr u8 kPsiDummyTag = 0x03;

inline Bytes psi_bin_point(u8 tag, u32 bin, std::span<const u8> elem) {
  Bytes out;
  out.push_back(tag);
  put_u32be(out, bin);
  out.insert(out.end(), elem.begin(), elem.end());
  return out;
}

struct CircuitPsiAlice {
  u32 mu = 0;
  std::vector<U128> bin_values;  // w_b
};
struct CircuitPsiBob {
  u32 mu = 0;
  std::vector<U128> bin_values;  // w-hat_b
  std::vector<i64> bin_item;     // index into Bob's set, -1 for padded bins
};

inline CircuitPsiAlice psi_circuit_alice(net::Channel& ch, const std::vector<Bytes>& my_set,
                                         Rng& rng, const CuckooParams& params = {}) {
  Bytes meta = ch.recv_msg(net::MsgType::hello);
  if (meta.size() != 12) throw ProtocolError("circuit-psi: bad params");
  u32 mu = get_u32be(meta.data());
  u64 hash_seed = get_u64be(meta.data() + 4);

  auto loads = simple_hash_loads(my_set, hash_seed, params.h, mu);
  u32 bound = max_bin_load_bound(my_set.size(), mu, params.h);
  for (u32 b = 0; b < mu; b++)
    if (loads[b] > bound) throw ProtocolError("circuit-psi: bin-size bound exceeded");

  CircuitPsiAlice res;
  res.mu = mu;
  res.bin_values.resize(mu);
  for (u32 b = 0; b < mu; b++) res.bin_values[b] = rng.next_u128();

  std::vector<std::pair<Bytes, U128>> points;
  for (const auto& e : my_set)
    for (u32 f = 0; f < params.h; f++) {
      u32 b = cuckoo_bin(e, hash_seed, f, mu);
      points.push_back({psi_bin_point(kPsiElemTag, b, e), res.bin_values[b]});
    }

  OprfKey key = OprfKey::random(rng);
  OpprfProgram prog = opprf_program(key, points, rng);
  opprf_send_program(ch, prog);
  oprf_serve(ch, key);
  return res;
}

inline CircuitPsiBob psi_circuit_bob(net::Channel& ch, const std::vector<Bytes>& my_set, Rng& rng,
                                     const CuckooParams& params = {}) {
  CuckooTable table = cuckoo_insert_all(my_set, params, rng.next());
  Bytes meta;
  put_u32be(meta, table.mu);
  put_u64be(meta, table.hash_seed);
  ch.send_msg(net::MsgType::hello, meta);

  CircuitPsiBob res;
  res.mu = table.mu;
  res.bin_item = table.bins;

  std::vector<Bytes> queries(table.mu);
  for (u32 b = 0; b < table.mu; b++) {
    if (table.bins[b] >= 0) {
      queries[b] = psi_bin_point(kPsiElemTag, b, my_set[size_t(table.bins[b])]);
    } else {
      Bytes fresh;
      put_u64le(fresh, rng.next());
      queries[b] = psi_bin_point(kPsiDummyTag, b, fresh);
    }
  }
  OpprfProgram prog = opprf_recv_program(ch);
  res.bin_values = opprf_eval_client(ch, prog, queries, rng);
  return res;
}

}  // namespace privimpute::crypto
