#pragma once

#include "privimpute/proto_common.hpp"

namespace privimpute::proto {

enum class PsiBackend { oprf, dh };

struct VerticalConfig {
  Variant variant = Variant::v_blind_mean;
  size_t alpha = 0;      // global row index, known to both
  size_t beta_local = 0; // Bob-local column index (Bob side only; never sent)
  QuantizationScheme scheme;  // radii for the party's own columns
  double pad_rho = 0.05;
  u64 pad_count = 0;     // absolute padding granularity override (0 = rho*n)
  int p_bits = 30;
  u64 seed = 1;
  PsiBackend psi = PsiBackend::oprf;
  bool random_mode = false;  // plain variant: sample instead of mean
  std::string triples_arith_file, triples_bool_file;
};

// Local neighbor candidates using only the party's own attributes; with a
// beta column given (Bob), rows missing beta are filtered out and beta is
// excluded from the tests. A superset of the true neighbors.
inline std::vector<size_t> local_neighbors(const Table& view, size_t alpha,
                                           std::optional<size_t> beta,
                                           const QuantizationScheme& s) {
  std::vector<size_t> out;
  for (size_t w = 0; w < view.n; w++) {
    if (w == alpha) continue;
    if (beta && !view.has(w, *beta)) continue;
    bool ok = true;
    for (size_t j = 0; j < view.m && ok; j++) {
      if (beta && j == *beta) continue;
      if (!view.has(alpha, j) || !view.has(w, j)) continue;
      if (!quantized_match(view.at(alpha, j), view.at(w, j), j, s)) ok = false;
    }
    if (ok) out.push_back(w);
  }
  return out;
}

// Pad a row-index set to the next multiple of the granularity with dummy
// identifiers from a reserved namespace: bit 63 set, bit 62 = party, low
// bits fresh per session. Dummies can never match rows or the peer's
// dummies.
inline std::vector<u64> pad_set(const std::vector<size_t>& indices, size_t n, double rho,
                                u64 pad_count, int party, Rng& rng) {
  u64 g = pad_count ? pad_count : u64(std::ceil(rho * double(n)));
  if (g < 1) throw ConfigError("pad_set: granularity must be >= 1");
  std::vector<u64> out(indices.begin(), indices.end());
  u64 target = std::max<u64>(1, (out.size() + g - 1) / g) * g;
  std::set<u64> used;
  while (out.size() < target) {
    u64 dummy = (u64(1) << 63) | (u64(party & 1) << 62) | (rng.next() & ((u64(1) << 62) - 1));
    if (used.insert(dummy).second) out.push_back(dummy);
  }
  rng.shuffle(out);
  return out;
}

namespace detail {

inline void check_vertical_variant(Variant v) {
  if (v != Variant::v_plain && v != Variant::v_blind_mean && v != Variant::v_blind_random)
    throw ConfigError("not a vertical variant");
}

inline void vertical_hello(net::Channel& ch, int party, const VerticalConfig& cfg, u32 n) {
  Bytes msg;
  msg.push_back(u8(cfg.variant));
  put_u32be(msg, u32(cfg.alpha));
  put_u32be(msg, n);
  msg.push_back(u8(cfg.p_bits));
  msg.push_back(u8(cfg.psi));
  put_u64be(msg, cfg.pad_count);
  Bytes peer;
  if (party == 0) {
    ch.send_msg(net::MsgType::hello, msg);
    peer = ch.recv_msg(net::MsgType::hello);
  } else {
    peer = ch.recv_msg(net::MsgType::hello);
    ch.send_msg(net::MsgType::hello, msg);
  }
  if (peer != msg) throw ProtocolError("hello: vertical session parameter mismatch");
}

// PSI identifier: row index (or dummy) keyed by the session salt
inline Bytes psi_id(u64 salt, u64 id) {
  Bytes b;
  put_u64le(b, salt);
  put_u64be(b, id);
  return b;
}

}  // namespace detail

struct VerticalOutcome {
  ProtoResult result;                  // at Bob
  std::vector<size_t> plain_intersection;  // plain variant, Bob side: rows
};

// ---- Alice (holds columns [0, m_A); learns alpha, outputs nothing) ----

inline VerticalOutcome run_vertical_alice(const VerticalConfig& cfg, const Table& view,
                                          net::Channel& ch) {
  detail::check_vertical_variant(cfg.variant);
  Rng rng(cfg.seed ^ 0xa11cea11ULL);
  ch.set_phase("setup");
  detail::vertical_hello(ch, 0, cfg, u32(view.n));
  auto salts = SessionSalts::exchange(ch, 0, rng);
  ch.snapshot_counters("setup");

  auto ia = local_neighbors(view, cfg.alpha, std::nullopt, cfg.scheme);
  auto padded = pad_set(ia, view.n, cfg.pad_rho, cfg.pad_count, 0, rng);
  u64 psi_salt = salts.derive("psi-id");
  std::vector<Bytes> ids;
  ids.reserve(padded.size());
  for (u64 v : padded) ids.push_back(detail::psi_id(psi_salt, v));

  VerticalOutcome out;

  if (cfg.variant == Variant::v_plain) {
    net::PhaseTimer ph(ch, "psi");
    if (cfg.psi == PsiBackend::oprf)
      crypto::psi_plain_sender(ch, ids, rng);
    else
      crypto::dh_psi_sender(ch, ids, rng);
    ch.snapshot_counters("psi");
    return out;
  }

  crypto::CircuitPsiAlice cpsi;
  {
    net::PhaseTimer ph(ch, "psi");
    cpsi = crypto::psi_circuit_alice(ch, ids, rng);
    ch.snapshot_counters("psi");
  }

  mpc::TripleProvider triples =
      cfg.triples_arith_file.empty()
          ? mpc::TripleProvider::dealer(0, salts.derive("dealer"))
          : mpc::TripleProvider::from_files(0, cfg.triples_arith_file, cfg.triples_bool_file);
  mpc::Engine eng(0, ch, std::move(triples), rng.next());
  net::PhaseTimer ph(ch, "mpc_eval");

  size_t mu = cpsi.mu;
  std::vector<u64> wlo(mu), whi(mu);
  for (size_t i = 0; i < mu; i++) {
    wlo[i] = cpsi.bin_values[i].lo;
    whi[i] = cpsi.bin_values[i].hi;
  }
  mpc::AVec a_lo = eng.input_arith(0, mu, wlo), a_hi = eng.input_arith(0, mu, whi);
  mpc::AVec b_lo = eng.input_arith(1, mu), b_hi = eng.input_arith(1, mu);
  mpc::BitVec flags = eng.eq128(a_lo, a_hi, b_lo, b_hi);
  mpc::AVec vals = eng.input_arith(1, mu);

  if (cfg.variant == Variant::v_blind_mean) {
    auto [s, c] = eng.conditional_sum(flags, vals);
    if (eng.open_bits(eng.eq_zero(c))->get(0)) {
      ch.snapshot_counters("mpc_eval");
      return out;
    }
    eng.div_reveal_signed(s, c, 1);
  } else {
    mpc::AVec m = eng.b2a(flags);
    mpc::AVec eta = mpc::Engine::scalar(mpc::Engine::sum(m));
    if (eng.open_bits(eng.eq_zero(eta))->get(0)) {
      ch.snapshot_counters("mpc_eval");
      return out;
    }
    mpc::AVec r = eng.joint_random_bits(1, cfg.p_bits, rng);
    mpc::AVec idx = eng.scale_and_truncate(r, eta, cfg.p_bits);
    mpc::AVec sel = eng.select_at_shared_index(flags, vals, idx);
    eng.open_arith(sel, 1, net::MsgType::reveal_out);
  }
  ch.snapshot_counters("mpc_eval");
  return out;
}

// ---- Bob (holds columns [m_A, m); beta is local; receives the value) ----

inline VerticalOutcome run_vertical_bob(const VerticalConfig& cfg, const Table& view,
                                        net::Channel& ch) {
  detail::check_vertical_variant(cfg.variant);
  const size_t beta = cfg.beta_local;
  Rng rng(cfg.seed ^ 0xb0b0b0bULL);
  ch.set_phase("setup");
  detail::vertical_hello(ch, 1, cfg, u32(view.n));
  auto salts = SessionSalts::exchange(ch, 1, rng);
  ch.snapshot_counters("setup");

  auto ib = local_neighbors(view, cfg.alpha, beta, cfg.scheme);
  auto padded = pad_set(ib, view.n, cfg.pad_rho, cfg.pad_count, 1, rng);
  u64 psi_salt = salts.derive("psi-id");
  std::vector<Bytes> ids;
  ids.reserve(padded.size());
  for (u64 v : padded) ids.push_back(detail::psi_id(psi_salt, v));

  VerticalOutcome out;

  if (cfg.variant == Variant::v_plain) {
    std::vector<size_t> hits;
    {
      net::PhaseTimer ph(ch, "psi");
      hits = cfg.psi == PsiBackend::oprf ? crypto::psi_plain_receiver(ch, ids, rng)
                                         : crypto::dh_psi_receiver(ch, ids, rng);
      ch.snapshot_counters("psi");
    }
    for (size_t i : hits)
      if (!(padded[i] >> 63)) out.plain_intersection.push_back(size_t(padded[i]));
    std::sort(out.plain_intersection.begin(), out.plain_intersection.end());
    if (out.plain_intersection.empty()) {
      out.result.value = std::nullopt;
      return out;
    }
    if (!cfg.random_mode) {
      i64 s = 0;
      for (size_t w : out.plain_intersection) s += view.at(w, beta);
      out.result.value = div_round_ties_away(s, i64(out.plain_intersection.size()));
    } else {
      std::vector<std::pair<i64, size_t>> vals;
      for (size_t w : out.plain_intersection) vals.push_back({view.at(w, beta), w});
      std::sort(vals.begin(), vals.end());
      out.result.value = vals[rng.below(vals.size())].first;
    }
    return out;
  }

  crypto::CircuitPsiBob cpsi;
  {
    net::PhaseTimer ph(ch, "psi");
    cpsi = crypto::psi_circuit_bob(ch, ids, rng);
    ch.snapshot_counters("psi");
  }

  mpc::TripleProvider triples =
      cfg.triples_arith_file.empty()
          ? mpc::TripleProvider::dealer(1, salts.derive("dealer"))
          : mpc::TripleProvider::from_files(1, cfg.triples_arith_file, cfg.triples_bool_file);
  mpc::Engine eng(1, ch, std::move(triples), rng.next());
  net::PhaseTimer ph(ch, "mpc_eval");

  size_t mu = cpsi.mu;
  std::vector<u64> hlo(mu), hhi(mu), bvals(mu, 0);
  for (size_t i = 0; i < mu; i++) {
    hlo[i] = cpsi.bin_values[i].lo;
    hhi[i] = cpsi.bin_values[i].hi;
    if (cpsi.bin_item[i] >= 0) {
      u64 id = padded[size_t(cpsi.bin_item[i])];
      if (!(id >> 63)) bvals[i] = u64(view.at(size_t(id), beta));
    }
  }
  mpc::AVec a_lo = eng.input_arith(0, mu), a_hi = eng.input_arith(0, mu);
  mpc::AVec b_lo = eng.input_arith(1, mu, hlo), b_hi = eng.input_arith(1, mu, hhi);
  mpc::BitVec flags = eng.eq128(a_lo, a_hi, b_lo, b_hi);
  mpc::AVec vals = eng.input_arith(1, mu, bvals);

  if (cfg.variant == Variant::v_blind_mean) {
    auto [s, c] = eng.conditional_sum(flags, vals);
    if (eng.open_bits(eng.eq_zero(c))->get(0)) {
      out.result.value = std::nullopt;
      ch.snapshot_counters("mpc_eval");
      return out;
    }
    out.result.value = eng.div_reveal_signed(s, c, 1);
  } else {
    mpc::AVec m = eng.b2a(flags);
    mpc::AVec eta = mpc::Engine::scalar(mpc::Engine::sum(m));
    if (eng.open_bits(eng.eq_zero(eta))->get(0)) {
      out.result.value = std::nullopt;
      ch.snapshot_counters("mpc_eval");
      return out;
    }
    mpc::AVec r = eng.joint_random_bits(1, cfg.p_bits, rng);
    mpc::AVec idx = eng.scale_and_truncate(r, eta, cfg.p_bits);
    mpc::AVec sel = eng.select_at_shared_index(flags, vals, idx);
    auto v = eng.open_arith(sel, 1, net::MsgType::reveal_out);
    out.result.value = i64(v.at(0));
  }
  ch.snapshot_counters("mpc_eval");
  return out;
}

}  // namespace privimpute::proto
