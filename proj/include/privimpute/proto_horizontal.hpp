#pragma once

#include <map>

#include "privimpute/proto_common.hpp"

namespace privimpute::proto {

struct PackingParams {
  u64 c = 1;
  u64 d = 1;
  double q = 0;  // probability a slot holds exactly one neighbor
};

// c maximizes q(c) = c*(l/nA)*(1-l/nA)^(c-1); d is the lowest count with
// (1-q(c))^d <= epsilon
inline PackingParams compute_packing(double ell, double n_a, double epsilon) {
  if (!(ell > 0) || !(ell < n_a)) throw ConfigError("packing: need 0 < ell < n_A");
  if (!(epsilon > 0) || !(epsilon < 1)) throw ConfigError("packing: need 0 < epsilon < 1");
  double x = ell / n_a;
  PackingParams p;
  p.c = u64(std::max(1.0, std::ceil(-1.0 / std::log1p(-x))));
  p.q = double(p.c) * x * std::pow(1.0 - x, double(p.c - 1));
  p.d = u64(std::max(1.0, std::ceil(std::log(epsilon) / std::log(1.0 - p.q))));
  return p;
}

struct HorizontalConfig {
  Variant variant = Variant::h_blind_mean;
  size_t beta = 0;
  QuantizationScheme scheme;
  // declared public per-attribute value bounds, needed when Bob's tuple has
  // missing attributes besides beta
  std::vector<std::optional<std::pair<i64, i64>>> bounds;
  int p_bits = 30;
  double epsilon = 9.094947017729282e-13;  // 2^-40
  double ell_frac = 0.01;
  u64 seed = 1;
  bool strict_abort = false;
  std::string triples_arith_file, triples_bool_file;  // empty = local dealer
};

struct HorizontalOutcome {
  ProtoResult result;           // meaningful at Bob
  std::vector<size_t> plain_ia;  // plain variants: Alice's learned neighbor set
};

namespace detail {

inline void check_horizontal_variant(Variant v) {
  if (v != Variant::h_plain_mean && v != Variant::h_plain_random &&
      v != Variant::h_blind_mean && v != Variant::h_blind_random)
    throw ConfigError("not a horizontal variant");
}

inline u64 radii_fingerprint(const QuantizationScheme& s) {
  Bytes b;
  for (i64 r : s.radii) put_u64le(b, u64(r));
  return crypto::hash_u64("radii", b);
}

struct HorizontalHello {
  u32 n_peer = 0;
};

inline HorizontalHello horizontal_hello(net::Channel& ch, int party, const HorizontalConfig& cfg,
                                        u32 my_n) {
  Bytes msg;
  msg.push_back(u8(cfg.variant));
  put_u16be(msg, u16(cfg.scheme.radii.size()));
  put_u16be(msg, u16(cfg.beta));
  put_u32be(msg, my_n);
  msg.push_back(u8(cfg.p_bits));
  put_u64be(msg, radii_fingerprint(cfg.scheme));
  u64 ef, ep;
  std::memcpy(&ef, &cfg.ell_frac, 8);
  std::memcpy(&ep, &cfg.epsilon, 8);
  put_u64be(msg, ef);
  put_u64be(msg, ep);
  Bytes peer;
  if (party == 0) {
    ch.send_msg(net::MsgType::hello, msg);
    peer = ch.recv_msg(net::MsgType::hello);
  } else {
    peer = ch.recv_msg(net::MsgType::hello);
    ch.send_msg(net::MsgType::hello, msg);
  }
  if (peer.size() != msg.size()) throw ProtocolError("hello: size mismatch");
  if (peer[0] != u8(cfg.variant)) throw ProtocolError("hello: variant mismatch");
  if (get_u32be(peer.data() + 1) != get_u32be(msg.data() + 1))
    throw ProtocolError("hello: m/beta mismatch");
  if (get_u64be(peer.data() + 10) != get_u64be(msg.data() + 10))
    throw ProtocolError("hello: radii mismatch");
  if (!std::equal(peer.begin() + 18, peer.end(), msg.begin() + 18))
    throw ProtocolError("hello: packing parameter mismatch");
  return {get_u32be(peer.data() + 5)};
}

// positions of packed tuples: a seeded subset in random order when
// d*c < n_A, otherwise shuffled copies of the full index range
inline std::vector<u32> make_packing_positions(u64 dc, u32 n_a, Rng& rng) {
  std::vector<u32> all(n_a);
  for (u32 i = 0; i < n_a; i++) all[i] = i;
  std::vector<u32> pos;
  if (dc < n_a) {
    rng.shuffle(all);
    pos.assign(all.begin(), all.begin() + dc);
  } else {
    while (pos.size() < dc) {
      rng.shuffle(all);
      for (u32 v : all) {
        if (pos.size() == dc) break;
        pos.push_back(v);
      }
    }
  }
  return pos;
}

// evaluated tuples: sorted unique positions
inline std::vector<u32> distinct_tuples(const std::vector<u32>& pos) {
  std::vector<u32> e = pos;
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

}  // namespace detail

// ---- Bob (has t_alpha with missing beta; receives the imputed value) ----

inline HorizontalOutcome run_horizontal_bob(const HorizontalConfig& cfg, const Table& view,
                                            size_t alpha_local, net::Channel& ch) {
  detail::check_horizontal_variant(cfg.variant);
  const size_t m = view.m;
  const size_t beta = cfg.beta;
  if (view.has(alpha_local, beta)) throw ConfigError("t_alpha's beta attribute is not missing");
  Rng rng(cfg.seed ^ 0xb0b0b0bULL);

  ch.set_phase("setup");
  auto hello = detail::horizontal_hello(ch, 1, cfg, u32(view.n));
  auto salts = SessionSalts::exchange(ch, 1, rng);
  const u32 n_alice = hello.n_peer;
  ch.snapshot_counters("setup");

  // local neighbors I_B among Bob's own tuples
  std::vector<size_t> ib;
  for (size_t w = 0; w < view.n; w++)
    if (w != alpha_local && is_neighbor(view, alpha_local, w, beta, cfg.scheme)) ib.push_back(w);
  i64 s_b = 0;
  for (size_t w : ib) s_b += view.at(w, beta);

  // packing (blind-random only)
  std::vector<u32> positions, tuples;
  PackingParams pack;
  if (cfg.variant == Variant::h_blind_random) {
    pack = compute_packing(cfg.ell_frac * double(n_alice), double(n_alice), cfg.epsilon);
    Rng prng(salts.derive("packing") ^ rng.next());
    positions = detail::make_packing_positions(pack.c * pack.d, n_alice, prng);
    Bytes msg;
    put_u32be(msg, u32(positions.size()));
    for (u32 v : positions) put_u32be(msg, v);
    ch.send_msg(net::MsgType::packing_order, msg);
    tuples = detail::distinct_tuples(positions);
  } else {
    tuples.resize(n_alice);
    for (u32 i = 0; i < n_alice; i++) tuples[i] = i;
  }

  // program the OPPRF: per evaluated tuple and attribute, a fresh sigma on
  // the three bucket points covering the quantized match set, plus the bot
  // point; a missing attribute of t_alpha programs its whole public range
  std::vector<U128> sigma_sum(tuples.size(), U128{0, 0});
  crypto::OprfKey key = crypto::OprfKey::random(rng);
  crypto::OpprfProgram program;
  {
    net::PhaseTimer ph(ch, "opprf_build");
    std::vector<std::pair<Bytes, U128>> points;
    Rng sig_rng(rng.next());
    for (size_t ti = 0; ti < tuples.size(); ti++) {
      u32 w = tuples[ti];
      for (size_t j = 0; j < m; j++) {
        if (j == beta) continue;
        U128 sigma = sig_rng.next_u128();
        sigma_sum[ti] += sigma;
        if (view.has(alpha_local, j)) {
          BucketPair q = quantize(view.at(alpha_local, j), j, cfg.scheme);
          BucketPair qp = adjacent_buckets(view.at(alpha_local, j), j, cfg.scheme);
          points.push_back({encode_value_point(w, u16(j), {q.q1, q.q2}), sigma});
          points.push_back({encode_value_point(w, u16(j), {q.q1, qp.q2}), sigma});
          points.push_back({encode_value_point(w, u16(j), {qp.q1, q.q2}), sigma});
        } else {
          if (j >= cfg.bounds.size() || !cfg.bounds[j])
            throw ConfigError("wildcard attribute needs declared public bounds (radii file)");
          auto [lo, hi] = *cfg.bounds[j];
          for (const auto& b : bucket_range(lo, hi, cfg.scheme.radius(j)))
            points.push_back({encode_value_point(w, u16(j), b), sigma});
        }
        points.push_back({encode_bot_point(w, u16(j)), sigma});
      }
    }
    program = crypto::opprf_program(key, points, rng);
    crypto::opprf_send_program(ch, program);
    ch.snapshot_counters("opprf_build");
  }
  {
    net::PhaseTimer ph(ch, "opprf_eval");
    crypto::oprf_serve(ch, key);
    ch.snapshot_counters("opprf_eval");
  }

  HorizontalOutcome out;

  if (cfg.variant == Variant::h_plain_mean || cfg.variant == Variant::h_plain_random) {
    // plain neighbor access: Bob discloses the expected sums
    net::PhaseTimer ph(ch, "output");
    Bytes msg;
    for (const auto& s : sigma_sum) {
      put_u64be(msg, s.lo);
      put_u64be(msg, s.hi);
    }
    ch.send_msg(net::MsgType::sigma_sums, msg);
  }

  // ---- shared computation ----
  mpc::TripleProvider triples =
      cfg.triples_arith_file.empty()
          ? mpc::TripleProvider::dealer(1, salts.derive("dealer"))
          : mpc::TripleProvider::from_files(1, cfg.triples_arith_file, cfg.triples_bool_file);
  mpc::Engine eng(1, ch, std::move(triples), rng.next());
  net::PhaseTimer ph(ch, "mpc_eval");

  auto finish_mean = [&](mpc::AVec sa, mpc::AVec ca) {
    mpc::AVec sb = eng.input_arith(1, 1, std::array<u64, 1>{u64(s_b)});
    mpc::AVec cb = eng.input_arith(1, 1, std::array<u64, 1>{u64(ib.size())});
    mpc::AVec num = mpc::Engine::add(sa, sb);
    mpc::AVec den = mpc::Engine::add(ca, cb);
    if (eng.open_bits(eng.eq_zero(den))->get(0)) {
      out.result.value = std::nullopt;
      return;
    }
    out.result.value = eng.div_reveal_signed(num, den, 1);
  };

  // oblivious draw from Bob's I_B (used by random variants)
  auto bob_sample = [&](Rng& r) -> mpc::AVec {
    size_t nb = std::max<size_t>(ib.size(), 1);
    std::vector<u64> vals(nb, 0);
    for (size_t i = 0; i < ib.size(); i++) vals[i] = u64(view.at(ib[i], beta));
    mpc::AVec bvals = eng.input_arith_dyn(1, vals);
    mpc::AVec cb = eng.input_arith(1, 1, std::array<u64, 1>{u64(ib.size())});
    mpc::AVec r2 = eng.joint_random_bits(1, cfg.p_bits, r);
    mpc::AVec idx = eng.scale_and_truncate(r2, cb, cfg.p_bits);
    return eng.select_at_shared_index(eng.one_bits(nb), bvals, idx);
  };

  switch (cfg.variant) {
    case Variant::h_plain_mean: {
      mpc::AVec sa = eng.input_arith(0, 1);
      mpc::AVec ca = eng.input_arith(0, 1);
      finish_mean(std::move(sa), std::move(ca));
      break;
    }
    case Variant::h_blind_mean: {
      size_t n = tuples.size();
      mpc::AVec tau_lo = eng.input_arith(0, n), tau_hi = eng.input_arith(0, n);
      std::vector<u64> slo(n), shi(n);
      for (size_t i = 0; i < n; i++) {
        slo[i] = sigma_sum[i].lo;
        shi[i] = sigma_sum[i].hi;
      }
      mpc::AVec sig_lo = eng.input_arith(1, n, slo), sig_hi = eng.input_arith(1, n, shi);
      mpc::BitVec eqf = eng.eq128(tau_lo, tau_hi, sig_lo, sig_hi);
      mpc::BitVec presence = eng.input_bits(0, n);
      mpc::BitVec flags = eng.b_and(eqf, presence);
      mpc::AVec avals = eng.input_arith(0, n);
      auto [sa, ca] = eng.conditional_sum(flags, avals);
      finish_mean(std::move(sa), std::move(ca));
      break;
    }
    case Variant::h_plain_random: {
      mpc::AVec va = eng.input_arith(0, 1);
      mpc::AVec ca = eng.input_arith(0, 1);
      mpc::AVec cb = eng.input_arith(1, 1, std::array<u64, 1>{u64(ib.size())});
      mpc::AVec den = mpc::Engine::add(ca, cb);
      if (eng.open_bits(eng.eq_zero(den))->get(0)) {
        out.result.value = std::nullopt;
        break;
      }
      mpc::AVec vb = bob_sample(rng);
      mpc::AVec r1 = eng.joint_random_bits(1, cfg.p_bits, rng);
      mpc::AVec big_r = eng.scale_and_truncate(r1, den, cfg.p_bits);
      mpc::BitVec alice_side = eng.lt(big_r, ca);
      mpc::AVec sel = eng.mux(alice_side, va, vb);
      auto v = eng.open_arith(sel, 1, net::MsgType::reveal_out);
      out.result.value = i64(v.at(0));
      break;
    }
    case Variant::h_blind_random: {
      size_t n = tuples.size();
      mpc::AVec tau_lo = eng.input_arith(0, n), tau_hi = eng.input_arith(0, n);
      std::vector<u64> slo(n), shi(n);
      for (size_t i = 0; i < n; i++) {
        slo[i] = sigma_sum[i].lo;
        shi[i] = sigma_sum[i].hi;
      }
      mpc::AVec sig_lo = eng.input_arith(1, n, slo), sig_hi = eng.input_arith(1, n, shi);
      mpc::BitVec eqf = eng.eq128(tau_lo, tau_hi, sig_lo, sig_hi);
      mpc::BitVec presence = eng.input_bits(0, n);
      mpc::BitVec flags = eng.b_and(eqf, presence);
      mpc::AVec avals = eng.input_arith(0, n);

      // expand to packed positions (share-local copies), then per-slot sums
      std::map<u32, size_t> lane_of;
      for (size_t i = 0; i < tuples.size(); i++) lane_of[tuples[i]] = i;
      mpc::AVec me = eng.b2a(flags);
      mpc::AVec ia_prime = mpc::Engine::scalar(mpc::Engine::sum(me));
      mpc::AVec pos_m, pos_v;
      for (u32 p : positions) {
        pos_m.v.push_back(me.v[lane_of[p]]);
        pos_v.v.push_back(avals.v[lane_of[p]]);
      }
      mpc::AVec terms = eng.mul(pos_m, pos_v);
      size_t d = positions.size() / pack.c;
      mpc::AVec cnt, val;
      for (size_t s = 0; s < d; s++) {
        u64 cs = 0, vs = 0;
        for (size_t i = 0; i < pack.c; i++) {
          cs += pos_m.v[s * pack.c + i];
          vs += terms.v[s * pack.c + i];
        }
        cnt.v.push_back(cs);
        val.v.push_back(vs);
      }
      mpc::BitVec cnt1 = eng.eq(cnt, eng.constant(d, 1));
      // first slot with count exactly 1: sel = cnt1 AND not-any-before
      mpc::BitVec nc = eng.b_not(cnt1);
      mpc::BitVec pref = nc;  // inclusive prefix-AND
      for (size_t s = 1; s < d; s <<= 1) {
        mpc::BitVec shifted = mpc::BitVec::zeros(d);
        for (size_t i = s; i < d; i++) shifted.set(i, pref.get(i - s));
        mpc::BitVec ones_head = mpc::BitVec::zeros(d);
        if (eng.party() == 0)
          for (size_t i = 0; i < s && i < d; i++) ones_head.set(i, true);
        mpc::BitVec arg = mpc::Engine::b_xor(shifted, ones_head);  // pad head with 1s
        pref = eng.b_and(pref, arg);
      }
      mpc::BitVec excl = mpc::BitVec::zeros(d);
      for (size_t i = 1; i < d; i++) excl.set(i, pref.get(i - 1));
      if (eng.party() == 0) excl.set(0, true);
      mpc::BitVec sel = eng.b_and(cnt1, excl);

      // at most one sel bit is set, so parity reconstructs the OR
      mpc::BitVec valid_share{1, {0}};
      u64 parity = 0;
      for (size_t i = 0; i < d; i++) parity ^= sel.get(i) ? 1 : 0;
      valid_share.w[0] = parity;
      bool valid = eng.open_bits(valid_share)->get(0);

      mpc::AVec vb = bob_sample(rng);
      if (!valid) {
        out.result.no_valid_slot = true;
        Bytes flag(1, cfg.strict_abort || ib.empty() ? 1 : 0);
        ch.send_msg(net::MsgType::no_neighbor, flag);
        if (flag[0] == 1) {
          out.result.value = std::nullopt;
          break;
        }
        auto v = eng.open_arith(vb, 1, net::MsgType::reveal_out);
        out.result.value = i64(v.at(0));
        break;
      }

      mpc::AVec sel_m = eng.b2a(sel);
      mpc::AVec va_terms = eng.mul(sel_m, val);
      mpc::AVec va = mpc::Engine::scalar(mpc::Engine::sum(va_terms));

      mpc::AVec ia_est = ia_prime;
      u64 dc = u64(positions.size());
      if (dc < n_alice) {
        // |I_A| ~ round(n_A/(d*c) * |I'_A|), divided in-circuit
        mpc::AVec numr = eng.add_const(mpc::Engine::scale(ia_prime, 2 * u64(n_alice)), dc);
        mpc::AVec denr = eng.constant(1, 2 * dc);
        ia_est = eng.bits_to_arith(eng.divide_bits(eng.a2b(numr), eng.a2b(denr)));
      }
      mpc::AVec cb = eng.input_arith(1, 1, std::array<u64, 1>{u64(ib.size())});
      mpc::AVec den = mpc::Engine::add(ia_est, cb);
      if (eng.open_bits(eng.eq_zero(den))->get(0)) {
        out.result.value = std::nullopt;
        break;
      }
      mpc::AVec r1 = eng.joint_random_bits(1, cfg.p_bits, rng);
      mpc::AVec big_r = eng.scale_and_truncate(r1, den, cfg.p_bits);
      mpc::BitVec alice_side = eng.lt(big_r, ia_est);
      mpc::AVec out_sh = eng.mux(alice_side, va, vb);
      auto v = eng.open_arith(out_sh, 1, net::MsgType::reveal_out);
      out.result.value = i64(v.at(0));
      break;
    }
    default:
      break;
  }
  ch.snapshot_counters("mpc_eval");
  return out;
}

// ---- Alice ----

inline HorizontalOutcome run_horizontal_alice(const HorizontalConfig& cfg, const Table& view,
                                              net::Channel& ch) {
  detail::check_horizontal_variant(cfg.variant);
  const size_t m = view.m;
  const size_t beta = cfg.beta;
  Rng rng(cfg.seed ^ 0xa11cea11ULL);

  ch.set_phase("setup");
  detail::horizontal_hello(ch, 0, cfg, u32(view.n));
  auto salts = SessionSalts::exchange(ch, 0, rng);
  ch.snapshot_counters("setup");

  std::vector<u32> positions, tuples;
  PackingParams pack;
  if (cfg.variant == Variant::h_blind_random) {
    pack = compute_packing(cfg.ell_frac * double(view.n), double(view.n), cfg.epsilon);
    Bytes msg = ch.recv_msg(net::MsgType::packing_order);
    u32 count = get_u32be(msg.data());
    if (msg.size() != 4 + u64(count) * 4) throw ProtocolError("bad packing order");
    positions.resize(count);
    for (u32 i = 0; i < count; i++) {
      positions[i] = get_u32be(msg.data() + 4 + i * 4);
      if (positions[i] >= view.n) throw ProtocolError("packing index out of range");
    }
    if (positions.size() != pack.c * pack.d) throw ProtocolError("packing order size mismatch");
    tuples = detail::distinct_tuples(positions);
  } else {
    tuples.resize(view.n);
    for (u32 i = 0; i < view.n; i++) tuples[i] = i;
  }

  crypto::OpprfProgram program;
  {
    net::PhaseTimer ph(ch, "opprf_build");
    program = crypto::opprf_recv_program(ch);
    ch.snapshot_counters("opprf_build");
  }

  // evaluate per (tuple, attribute): both quantizations of the own value,
  // or the bot point when it is missing
  std::vector<U128> tau_sum(tuples.size(), U128{0, 0});
  {
    net::PhaseTimer ph(ch, "opprf_eval");
    std::vector<Bytes> queries;
    queries.reserve(tuples.size() * (m - 1));
    for (u32 w : tuples)
      for (size_t j = 0; j < m; j++) {
        if (j == beta) continue;
        if (view.has(w, j))
          queries.push_back(encode_value_point(w, u16(j), quantize(view.at(w, j), j, cfg.scheme)));
        else
          queries.push_back(encode_bot_point(w, u16(j)));
      }
    std::vector<U128> tau = crypto::opprf_eval_client(ch, program, queries, rng);
    size_t k = 0;
    for (size_t ti = 0; ti < tuples.size(); ti++)
      for (size_t j = 0; j < m; j++) {
        if (j == beta) continue;
        tau_sum[ti] += tau[k++];
      }
    ch.snapshot_counters("opprf_eval");
  }

  HorizontalOutcome out;

  std::vector<U128> sigma_sum;
  if (cfg.variant == Variant::h_plain_mean || cfg.variant == Variant::h_plain_random) {
    net::PhaseTimer ph(ch, "output");
    Bytes msg = ch.recv_msg(net::MsgType::sigma_sums);
    if (msg.size() != tuples.size() * 16) throw ProtocolError("bad sigma sums");
    sigma_sum.resize(tuples.size());
    for (size_t i = 0; i < tuples.size(); i++)
      sigma_sum[i] = {get_u64be(msg.data() + i * 16), get_u64be(msg.data() + i * 16 + 8)};
    for (size_t i = 0; i < tuples.size(); i++)
      if (sigma_sum[i] == tau_sum[i] && view.has(tuples[i], beta))
        out.plain_ia.push_back(tuples[i]);
  }

  mpc::TripleProvider triples =
      cfg.triples_arith_file.empty()
          ? mpc::TripleProvider::dealer(0, salts.derive("dealer"))
          : mpc::TripleProvider::from_files(0, cfg.triples_arith_file, cfg.triples_bool_file);
  mpc::Engine eng(0, ch, std::move(triples), rng.next());
  net::PhaseTimer ph(ch, "mpc_eval");

  auto finish_mean_alice = [&](mpc::AVec sa, mpc::AVec ca) {
    mpc::AVec sb = eng.input_arith(1, 1);
    mpc::AVec cb = eng.input_arith(1, 1);
    mpc::AVec num = mpc::Engine::add(sa, sb);
    mpc::AVec den = mpc::Engine::add(ca, cb);
    if (eng.open_bits(eng.eq_zero(den))->get(0)) return;
    eng.div_reveal_signed(num, den, 1);
  };

  auto bob_sample_alice = [&](Rng& r) -> mpc::AVec {
    // Bob's input length (max(|I_B|,1)) rides with the share frame; engine
    // input sizes are public, like any circuit shape
    mpc::AVec bvals = eng.input_arith_dyn(1);
    mpc::AVec cb = eng.input_arith(1, 1);
    mpc::AVec r2 = eng.joint_random_bits(1, cfg.p_bits, r);
    mpc::AVec idx = eng.scale_and_truncate(r2, cb, cfg.p_bits);
    return eng.select_at_shared_index(eng.one_bits(bvals.size()), bvals, idx);
  };

  switch (cfg.variant) {
    case Variant::h_plain_mean: {
      i64 sa = 0;
      for (size_t w : out.plain_ia) sa += view.at(w, beta);
      mpc::AVec sa_sh = eng.input_arith(0, 1, std::array<u64, 1>{u64(sa)});
      mpc::AVec ca_sh = eng.input_arith(0, 1, std::array<u64, 1>{u64(out.plain_ia.size())});
      finish_mean_alice(std::move(sa_sh), std::move(ca_sh));
      break;
    }
    case Variant::h_blind_mean: {
      size_t n = tuples.size();
      std::vector<u64> tlo(n), thi(n);
      for (size_t i = 0; i < n; i++) {
        tlo[i] = tau_sum[i].lo;
        thi[i] = tau_sum[i].hi;
      }
      mpc::AVec tau_lo = eng.input_arith(0, n, tlo), tau_hi = eng.input_arith(0, n, thi);
      mpc::AVec sig_lo = eng.input_arith(1, n), sig_hi = eng.input_arith(1, n);
      mpc::BitVec eqf = eng.eq128(tau_lo, tau_hi, sig_lo, sig_hi);
      mpc::BitVec pres = mpc::BitVec::zeros(n);
      std::vector<u64> avals(n, 0);
      for (size_t i = 0; i < n; i++) {
        if (view.has(tuples[i], beta)) {
          pres.set(i, true);
          avals[i] = u64(view.at(tuples[i], beta));
        }
      }
      mpc::BitVec presence = eng.input_bits(0, n, &pres);
      mpc::BitVec flags = eng.b_and(eqf, presence);
      mpc::AVec av = eng.input_arith(0, n, avals);
      auto [sa, ca] = eng.conditional_sum(flags, av);
      finish_mean_alice(std::move(sa), std::move(ca));
      break;
    }
    case Variant::h_plain_random: {
      i64 va = 0;
      if (!out.plain_ia.empty()) {
        std::vector<std::pair<i64, size_t>> vals;
        for (size_t w : out.plain_ia) vals.push_back({view.at(w, beta), w});
        std::sort(vals.begin(), vals.end());
        va = vals[rng.below(vals.size())].first;
      }
      mpc::AVec va_sh = eng.input_arith(0, 1, std::array<u64, 1>{u64(va)});
      mpc::AVec ca_sh = eng.input_arith(0, 1, std::array<u64, 1>{u64(out.plain_ia.size())});
      mpc::AVec cb = eng.input_arith(1, 1);
      mpc::AVec den = mpc::Engine::add(ca_sh, cb);
      if (eng.open_bits(eng.eq_zero(den))->get(0)) break;
      mpc::AVec vb = bob_sample_alice(rng);
      mpc::AVec r1 = eng.joint_random_bits(1, cfg.p_bits, rng);
      mpc::AVec big_r = eng.scale_and_truncate(r1, den, cfg.p_bits);
      mpc::BitVec alice_side = eng.lt(big_r, ca_sh);
      mpc::AVec sel = eng.mux(alice_side, va_sh, vb);
      eng.open_arith(sel, 1, net::MsgType::reveal_out);
      break;
    }
    case Variant::h_blind_random: {
      size_t n = tuples.size();
      std::vector<u64> tlo(n), thi(n);
      for (size_t i = 0; i < n; i++) {
        tlo[i] = tau_sum[i].lo;
        thi[i] = tau_sum[i].hi;
      }
      mpc::AVec tau_lo = eng.input_arith(0, n, tlo), tau_hi = eng.input_arith(0, n, thi);
      mpc::AVec sig_lo = eng.input_arith(1, n), sig_hi = eng.input_arith(1, n);
      mpc::BitVec eqf = eng.eq128(tau_lo, tau_hi, sig_lo, sig_hi);
      mpc::BitVec pres = mpc::BitVec::zeros(n);
      std::vector<u64> avals(n, 0);
      for (size_t i = 0; i < n; i++) {
        if (view.has(tuples[i], beta)) {
          pres.set(i, true);
          avals[i] = u64(view.at(tuples[i], beta));
        }
      }
      mpc::BitVec presence = eng.input_bits(0, n, &pres);
      mpc::BitVec flags = eng.b_and(eqf, presence);
      mpc::AVec av = eng.input_arith(0, n, avals);

      std::map<u32, size_t> lane_of;
      for (size_t i = 0; i < tuples.size(); i++) lane_of[tuples[i]] = i;
      mpc::AVec me = eng.b2a(flags);
      mpc::AVec ia_prime = mpc::Engine::scalar(mpc::Engine::sum(me));
      mpc::AVec pos_m, pos_v;
      for (u32 p : positions) {
        pos_m.v.push_back(me.v[lane_of[p]]);
        pos_v.v.push_back(av.v[lane_of[p]]);
      }
      mpc::AVec terms = eng.mul(pos_m, pos_v);
      size_t d = positions.size() / pack.c;
      mpc::AVec cnt, val;
      for (size_t s = 0; s < d; s++) {
        u64 cs = 0, vs = 0;
        for (size_t i = 0; i < pack.c; i++) {
          cs += pos_m.v[s * pack.c + i];
          vs += terms.v[s * pack.c + i];
        }
        cnt.v.push_back(cs);
        val.v.push_back(vs);
      }
      mpc::BitVec cnt1 = eng.eq(cnt, eng.constant(d, 1));
      mpc::BitVec nc = eng.b_not(cnt1);
      mpc::BitVec pref = nc;
      for (size_t s = 1; s < d; s <<= 1) {
        mpc::BitVec shifted = mpc::BitVec::zeros(d);
        for (size_t i = s; i < d; i++) shifted.set(i, pref.get(i - s));
        mpc::BitVec ones_head = mpc::BitVec::zeros(d);
        if (eng.party() == 0)
          for (size_t i = 0; i < s && i < d; i++) ones_head.set(i, true);
        mpc::BitVec arg = mpc::Engine::b_xor(shifted, ones_head);
        pref = eng.b_and(pref, arg);
      }
      mpc::BitVec excl = mpc::BitVec::zeros(d);
      for (size_t i = 1; i < d; i++) excl.set(i, pref.get(i - 1));
      if (eng.party() == 0) excl.set(0, true);
      mpc::BitVec sel = eng.b_and(cnt1, excl);

      mpc::BitVec valid_share{1, {0}};
      u64 parity = 0;
      for (size_t i = 0; i < d; i++) parity ^= sel.get(i) ? 1 : 0;
      valid_share.w[0] = parity;
      bool valid = eng.open_bits(valid_share)->get(0);

      mpc::AVec vb = bob_sample_alice(rng);
      if (!valid) {
        Bytes flag = ch.recv_msg(net::MsgType::no_neighbor);
        if (flag.at(0) == 1) break;
        eng.open_arith(vb, 1, net::MsgType::reveal_out);
        break;
      }

      mpc::AVec sel_m = eng.b2a(sel);
      mpc::AVec va_terms = eng.mul(sel_m, val);
      mpc::AVec va = mpc::Engine::scalar(mpc::Engine::sum(va_terms));

      mpc::AVec ia_est = ia_prime;
      u64 dc = u64(positions.size());
      if (dc < view.n) {
        mpc::AVec numr = eng.add_const(mpc::Engine::scale(ia_prime, 2 * u64(view.n)), dc);
        mpc::AVec denr = eng.constant(1, 2 * dc);
        ia_est = eng.bits_to_arith(eng.divide_bits(eng.a2b(numr), eng.a2b(denr)));
      }
      mpc::AVec cb = eng.input_arith(1, 1);
      mpc::AVec den = mpc::Engine::add(ia_est, cb);
      if (eng.open_bits(eng.eq_zero(den))->get(0)) break;
      mpc::AVec r1 = eng.joint_random_bits(1, cfg.p_bits, rng);
      mpc::AVec big_r = eng.scale_and_truncate(r1, den, cfg.p_bits);
      mpc::BitVec alice_side = eng.lt(big_r, ia_est);
      mpc::AVec out_sh = eng.mux(alice_side, va, vb);
      eng.open_arith(out_sh, 1, net::MsgType::reveal_out);
      break;
    }
    default:
      break;
  }
  ch.snapshot_counters("mpc_eval");
  return out;
}

}  // namespace privimpute::proto
