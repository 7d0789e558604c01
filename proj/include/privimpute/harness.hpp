#pragma once

#include <functional>
#include <thread>

#include "privimpute/proto_horizontal.hpp"
#include "privimpute/proto_vertical.hpp"

namespace privimpute::harness {

// Run Alice and Bob party loops over an in-process channel pair; each loop
// owns its endpoint so a throwing side unblocks the peer.
inline void run_pair(std::function<void(net::Channel&)> alice,
                     std::function<void(net::Channel&)> bob,
                     std::chrono::milliseconds timeout = std::chrono::milliseconds(120000)) {
  auto [ca, cb] = net::make_in_process_pair(timeout);
  std::exception_ptr ea, eb;
  std::thread ta([&, ch = std::move(ca)]() mutable {
    try {
      alice(*ch);
    } catch (...) {
      ea = std::current_exception();
    }
    ch.reset();
  });
  std::thread tb([&, ch = std::move(cb)]() mutable {
    try {
      bob(*ch);
    } catch (...) {
      eb = std::current_exception();
    }
    ch.reset();
  });
  ta.join();
  tb.join();
  // a failing party tears its channel down and the peer sees a disconnect;
  // surface the root cause, not the knock-on channel error
  auto is_channel_error = [](const std::exception_ptr& e) {
    try {
      std::rethrow_exception(e);
    } catch (const net::ChannelError&) {
      return true;
    } catch (...) {
      return false;
    }
  };
  if (ea && eb) std::rethrow_exception(is_channel_error(eb) ? ea : eb);
  if (eb) std::rethrow_exception(eb);
  if (ea) std::rethrow_exception(ea);
}

// Synthetic Gaussian-cluster table: row 0 is the query tuple (beta = last
// column, missing); round(fraction*n) rows sit within r/4 of it on every
// attribute, everyone else lies beyond 3r/2 on every attribute, so
// quantized neighbor status is unambiguous. Planted neighbors are evenly
// spaced so contiguous splits stay proportional.
struct SyntheticSpec {
  size_t n = 1000, m = 5;
  double neighbor_fraction = 0.01;
  i64 radius = 1000;
  u64 seed = 1;
};

inline Table gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2 || spec.m < 2) throw ConfigError("gen_synthetic: need n >= 2, m >= 2");
  if (spec.radius < 2 || spec.radius % 2) throw ConfigError("gen_synthetic: radius must be even");
  size_t want = size_t(std::llround(spec.neighbor_fraction * double(spec.n)));
  if (want > spec.n - 1) throw ConfigError("gen_synthetic: infeasible neighbor fraction");

  Table t;
  t.n = spec.n;
  t.m = spec.m;
  t.scale = 1;  // synthetic values are generated directly in the scaled domain
  t.value_bits = 48;
  t.kinds.assign(t.m, AttrKind::numerical);
  t.dicts.resize(t.m);
  for (size_t j = 0; j < t.m; j++) t.names.push_back("x" + std::to_string(j));
  t.vals.assign(t.n * t.m, 0);
  t.present.assign(t.n * t.m, 0);

  Rng rng(spec.seed);
  const i64 r = spec.radius;
  std::vector<i64> center(t.m);
  for (size_t j = 0; j < t.m; j++) center[j] = i64(j) * 16 * r;

  std::vector<u8> is_nb(t.n, 0);
  if (want > 0) {
    double stride = double(t.n - 1) / double(want);
    for (size_t k = 0; k < want; k++) is_nb[1 + size_t(std::floor(double(k) * stride))] = 1;
  }

  for (size_t j = 0; j < t.m; j++) t.set(0, j, center[j]);
  t.clear_cell(0, t.m - 1);  // the cell to impute

  for (size_t i = 1; i < t.n; i++) {
    for (size_t j = 0; j < t.m; j++) {
      i64 v;
      if (is_nb[i]) {
        v = center[j] + i64(rng.below(u64(r / 2 + 1))) - r / 4;
      } else {
        i64 mag = 2 * r + i64(std::llround(std::abs(rng.gaussian()) * double(r)));
        v = center[j] + (rng.bit() ? mag : -mag);
      }
      t.set(i, j, v);
    }
  }
  return t;
}

// ---- accuracy harness: repeated split x missingness evaluation grid ----

struct EvalPlan {
  Table base;
  size_t beta = 0;
  MissPattern pattern = MissPattern::MCAR;
  double fraction = 0.10;
  size_t split_reps = 25;
  size_t miss_reps = 25;
  std::vector<std::string> methods = {"rnn_full", "knn_full", "knn_vertical_local",
                                      "knn_horizontal_local"};
  double alice_share = 0.5;
  size_t m_alice = 0;  // 0 = m/2
  size_t knn_k = 5;
  u64 seed = 1;
  proto::Variant h_variant = proto::Variant::h_blind_mean;
  proto::Variant v_variant = proto::Variant::v_blind_mean;
};

struct EvalRow {
  std::string method;
  size_t split_rep, miss_rep;
  double rmse;
};
struct EvalSummary {
  std::string method;
  double mean_rmse, ci_lo, ci_hi;
  double scaled_pct;  // 100 * mean / mean(rnn_full)
};
struct EvalResult {
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> summaries;
  std::vector<i64> radii;
};

namespace detail {

inline double eval_private_horizontal(const Table& corrupted, const SplitResult& sp,
                                      const GroundTruth& gt, size_t beta,
                                      const QuantizationScheme& scheme, const RadiiFile& rf,
                                      proto::Variant variant, u64 seed, i64 scale) {
  // the party holding the dropped row plays Bob
  std::vector<i64> row_home(corrupted.n, -1);
  std::vector<size_t> row_local(corrupted.n, 0);
  for (size_t i = 0; i < sp.alice_rows.size(); i++) {
    row_home[sp.alice_rows[i]] = 0;
    row_local[sp.alice_rows[i]] = i;
  }
  for (size_t i = 0; i < sp.bob_rows.size(); i++) {
    row_home[sp.bob_rows[i]] = 1;
    row_local[sp.bob_rows[i]] = i;
  }
  std::vector<double> truth, pred;
  for (auto [row, orig] : gt.dropped) {
    const Table& bob_view = row_home[row] == 1 ? sp.bob : sp.alice;
    const Table& alice_view = row_home[row] == 1 ? sp.alice : sp.bob;
    proto::HorizontalConfig cfg;
    cfg.variant = variant;
    cfg.beta = beta;
    cfg.scheme = scheme;
    cfg.bounds = rf.bounds;
    cfg.seed = seed ^ (row * 0x9e37ULL);
    proto::HorizontalOutcome bob_out;
    run_pair([&](net::Channel& ch) { proto::run_horizontal_alice(cfg, alice_view, ch); },
             [&](net::Channel& ch) {
               bob_out = proto::run_horizontal_bob(cfg, bob_view, row_local[row], ch);
             });
    i64 v = bob_out.result.value ? *bob_out.result.value : corrupted.column_mean_round(beta);
    truth.push_back(double(orig) / double(scale));
    pred.push_back(double(v) / double(scale));
  }
  return rmse(truth, pred);
}

inline double eval_private_vertical(const Table& corrupted, const SplitResult& sp,
                                    const GroundTruth& gt, size_t beta, size_t m_alice,
                                    const QuantizationScheme& scheme, proto::Variant variant,
                                    u64 seed, i64 scale) {
  QuantizationScheme alice_scheme{{scheme.radii.begin(), scheme.radii.begin() + i64(m_alice)}};
  QuantizationScheme bob_scheme{{scheme.radii.begin() + i64(m_alice), scheme.radii.end()}};
  std::vector<double> truth, pred;
  for (auto [row, orig] : gt.dropped) {
    proto::VerticalConfig acfg;
    acfg.variant = variant;
    acfg.alpha = row;
    acfg.scheme = alice_scheme;
    acfg.seed = seed ^ (row * 0x9e37ULL);
    proto::VerticalConfig bcfg = acfg;
    bcfg.scheme = bob_scheme;
    bcfg.beta_local = beta - m_alice;
    proto::VerticalOutcome bob_out;
    run_pair([&](net::Channel& ch) { proto::run_vertical_alice(acfg, sp.alice, ch); },
             [&](net::Channel& ch) { bob_out = proto::run_vertical_bob(bcfg, sp.bob, ch); });
    i64 v = bob_out.result.value ? *bob_out.result.value : corrupted.column_mean_round(beta);
    truth.push_back(double(orig) / double(scale));
    pred.push_back(double(v) / double(scale));
  }
  return rmse(truth, pred);
}

}  // namespace detail

inline EvalResult eval_accuracy(const EvalPlan& plan) {
  if (plan.methods.empty()) throw ConfigError("eval: need at least one method");
  if (plan.fraction <= 0) throw ConfigError("eval: nothing to impute (zero missingness)");
  const Table& base = plan.base;
  const size_t beta = plan.beta;
  const size_t m_alice = plan.m_alice ? plan.m_alice : base.m / 2;
  if (beta < m_alice) throw ConfigError("eval: beta must sit on Bob's side of the vertical cut");

  RadiusSearchConfig rcfg;
  rcfg.seed = plan.seed;
  auto rres = search_radii(base, beta, rcfg);
  QuantizationScheme scheme{rres.radii};
  RadiiFile rf = make_radii_file(base, rres.radii);

  EvalResult out;
  out.radii = rres.radii;
  Rng seeder(plan.seed);

  for (size_t s = 0; s < plan.split_reps; s++) {
    u64 split_seed = seeder.fork(1000 + s).next();
    SplitSpec hsplit{SplitSpec::Mode::horizontal, plan.alice_share, 0, split_seed};
    SplitSpec vsplit{SplitSpec::Mode::vertical, 0.0, m_alice, split_seed};
    for (size_t t = 0; t < plan.miss_reps; t++) {
      MissingnessSpec mspec;
      mspec.pattern = plan.pattern;
      mspec.fraction = plan.fraction;
      mspec.target_column = beta;
      mspec.driver_column = beta == 0 ? 1 : beta - 1;
      mspec.seed = seeder.fork(2000 + s * plan.miss_reps + t).next();
      auto [corrupted, gt] = inject_missing(base, mspec);
      if (gt.dropped.empty()) continue;

      SplitResult hsp, vsp;
      bool need_h = false, need_v = false;
      for (const auto& m : plan.methods) {
        need_h |= m == "knn_horizontal_local" || m == "rnn_private_horizontal";
        need_v |= m == "knn_vertical_local" || m == "rnn_private_vertical";
      }
      if (need_h) hsp = split(corrupted, hsplit, beta);
      if (need_v) vsp = split(corrupted, vsplit, beta);

      std::vector<i64> row_home(corrupted.n, -1);
      std::vector<size_t> row_local(corrupted.n, 0);
      if (need_h) {
        for (size_t i = 0; i < hsp.alice_rows.size(); i++) {
          row_home[hsp.alice_rows[i]] = 0;
          row_local[hsp.alice_rows[i]] = i;
        }
        for (size_t i = 0; i < hsp.bob_rows.size(); i++) {
          row_home[hsp.bob_rows[i]] = 1;
          row_local[hsp.bob_rows[i]] = i;
        }
      }

      for (const auto& method : plan.methods) {
        std::vector<double> truth, pred;
        auto push = [&](i64 orig, i64 v) {
          truth.push_back(double(orig) / double(base.scale));
          pred.push_back(double(v) / double(base.scale));
        };
        if (method == "rnn_full") {
          for (auto [row, orig] : gt.dropped)
            push(orig, impute_oracle(corrupted, {row, beta}, scheme, ImputeMode::mean).value);
        } else if (method == "knn_full") {
          for (auto [row, orig] : gt.dropped)
            push(orig, knn_impute(corrupted, {row, beta}, plan.knn_k).value);
        } else if (method == "knn_vertical_local") {
          for (auto [row, orig] : gt.dropped)
            push(orig, knn_impute(vsp.bob, {row, beta - m_alice}, plan.knn_k).value);
        } else if (method == "knn_horizontal_local") {
          for (auto [row, orig] : gt.dropped) {
            const Table& view = row_home[row] == 1 ? hsp.bob : hsp.alice;
            push(orig, knn_impute(view, {row_local[row], beta}, plan.knn_k).value);
          }
        } else if (method == "rnn_private_horizontal") {
          double e = detail::eval_private_horizontal(corrupted, hsp, gt, beta, scheme, rf,
                                                     plan.h_variant, mspec.seed, base.scale);
          out.rows.push_back({method, s, t, e});
          continue;
        } else if (method == "rnn_private_vertical") {
          double e = detail::eval_private_vertical(corrupted, vsp, gt, beta, m_alice, scheme,
                                                   plan.v_variant, mspec.seed, base.scale);
          out.rows.push_back({method, s, t, e});
          continue;
        } else {
          throw ConfigError("eval: unknown method " + method);
        }
        out.rows.push_back({method, s, t, rmse(truth, pred)});
      }
    }
  }

  // per-method summaries with 95% CI, scaled to rnn_full's mean
  double rnn_full_mean = 0;
  for (const auto& method : plan.methods) {
    std::vector<double> xs;
    for (const auto& r : out.rows)
      if (r.method == method) xs.push_back(r.rmse);
    if (xs.empty()) continue;
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    double stderr_ = xs.size() > 1 ? std::sqrt(var / double(xs.size() - 1) / double(xs.size()))
                                   : 0.0;
    if (method == "rnn_full") rnn_full_mean = mean;
    out.summaries.push_back({method, mean, mean - 1.96 * stderr_, mean + 1.96 * stderr_, 0});
  }
  for (auto& s : out.summaries)
    s.scaled_pct = rnn_full_mean > 0 ? 100.0 * s.mean_rmse / rnn_full_mean : 0.0;
  return out;
}

inline void write_eval_csv(const EvalResult& res, std::ostream& os) {
  os << "kind,method,split_rep,miss_rep,rmse,ci_lo,ci_hi,scaled_pct\n";
  for (const auto& r : res.rows)
    os << "rep," << r.method << "," << r.split_rep << "," << r.miss_rep << "," << r.rmse
       << ",,,\n";
  for (const auto& s : res.summaries)
    os << "summary," << s.method << ",,," << s.mean_rmse << "," << s.ci_lo << "," << s.ci_hi
       << "," << s.scaled_pct << "\n";
}

// ---- benchmark runner: phase wall-times and bytes per variant ----

struct BenchPlan {
  size_t n = 50000, m = 10;
  double neighbor_fraction = 0.01;
  std::vector<std::string> variants = {"h-blind-mean", "h-blind-random", "v-blind-mean",
                                       "v-blind-random"};
  size_t trials = 25;
  i64 radius = 1000;
  u64 seed = 1;
  double pad_rho = 0.05;
  u64 pad_count = 0;
  double epsilon = 9.094947017729282e-13;  // 2^-40
};

struct BenchRow {
  std::string split, variant;
  size_t trial = 0;
  size_t n = 0, m = 0;
  double neighbor_fraction = 0;
  double crypto_s = 0;  // OPPRF (horizontal) or PSI (vertical)
  double mpc_build_s = 0, mpc_eval_s = 0, total_s = 0;
  double comm_mb = 0;
};

inline const char* bench_csv_header() {
  return "split,variant,trial,n,m,neighbor_fraction,crypto_s,mpc_build_s,mpc_eval_s,total_s,"
         "comm_mb";
}

inline std::vector<BenchRow> bench(const BenchPlan& plan) {
  SyntheticSpec sspec{plan.n, plan.m, plan.neighbor_fraction, plan.radius, plan.seed};
  Table table = gen_synthetic(sspec);
  const size_t beta = plan.m - 1;
  std::vector<i64> radii(plan.m, plan.radius);
  QuantizationScheme scheme{radii};
  RadiiFile rf = make_radii_file(table, radii);

  // horizontal: Bob holds the query row 0
  size_t n_a = plan.n / 2;
  std::vector<size_t> arows, brows;
  brows.push_back(0);
  for (size_t i = 1; i < plan.n; i++) (i <= n_a ? arows : brows).push_back(i);
  Table h_alice = select_rows(table, arows);
  Table h_bob = select_rows(table, brows);

  size_t m_alice = plan.m / 2;
  Table v_alice = select_cols(table, 0, m_alice);
  Table v_bob = select_cols(table, m_alice, plan.m);
  QuantizationScheme va_scheme{{radii.begin(), radii.begin() + i64(m_alice)}};
  QuantizationScheme vb_scheme{{radii.begin() + i64(m_alice), radii.end()}};

  std::vector<BenchRow> rows;
  Rng seeder(plan.seed ^ 0xbe9c4);
  for (const auto& name : plan.variants) {
    for (size_t trial = 0; trial < plan.trials; trial++) {
      BenchRow row;
      row.variant = name;
      row.trial = trial;
      row.n = plan.n;
      row.m = plan.m;
      row.neighbor_fraction = plan.neighbor_fraction;
      u64 seed = seeder.next();
      u64 bytes = 0;
      std::map<std::string, u64> phases;
      auto t0 = std::chrono::steady_clock::now();
      if (name.rfind("h-", 0) == 0) {
        row.split = "horizontal";
        proto::HorizontalConfig cfg;
        cfg.variant = name == "h-plain-mean"     ? proto::Variant::h_plain_mean
                      : name == "h-plain-random" ? proto::Variant::h_plain_random
                      : name == "h-blind-mean"   ? proto::Variant::h_blind_mean
                                                 : proto::Variant::h_blind_random;
        cfg.beta = beta;
        cfg.scheme = scheme;
        cfg.bounds = rf.bounds;
        cfg.ell_frac = plan.neighbor_fraction;
        cfg.epsilon = plan.epsilon;
        cfg.seed = seed;
        run_pair(
            [&](net::Channel& ch) { proto::run_horizontal_alice(cfg, h_alice, ch); },
            [&](net::Channel& ch) {
              proto::run_horizontal_bob(cfg, h_bob, 0, ch);
              bytes = ch.sent_bytes() + ch.received_bytes();
              phases = ch.phase_times();
            },
            std::chrono::milliseconds(600000));
        row.crypto_s = double(phases["opprf_build"] + phases["opprf_eval"]) * 1e-9;
      } else {
        row.split = "vertical";
        proto::VerticalConfig acfg;
        acfg.variant = name == "v-plain"        ? proto::Variant::v_plain
                       : name == "v-blind-mean" ? proto::Variant::v_blind_mean
                                                : proto::Variant::v_blind_random;
        acfg.alpha = 0;
        acfg.scheme = va_scheme;
        acfg.pad_rho = plan.pad_rho;
        acfg.pad_count = plan.pad_count;
        acfg.seed = seed;
        proto::VerticalConfig bcfg = acfg;
        bcfg.scheme = vb_scheme;
        bcfg.beta_local = beta - m_alice;
        run_pair(
            [&](net::Channel& ch) { proto::run_vertical_alice(acfg, v_alice, ch); },
            [&](net::Channel& ch) {
              proto::run_vertical_bob(bcfg, v_bob, ch);
              bytes = ch.sent_bytes() + ch.received_bytes();
              phases = ch.phase_times();
            },
            std::chrono::milliseconds(600000));
        row.crypto_s = double(phases["psi"]) * 1e-9;
      }
      row.total_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.mpc_build_s = double(phases["mpc_build"]) * 1e-9;
      row.mpc_eval_s = double(phases["mpc_eval"]) * 1e-9;
      row.comm_mb = double(bytes) / (1024.0 * 1024.0);
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& os) {
  os << bench_csv_header() << "\n";
  for (const auto& r : rows)
    os << r.split << "," << r.variant << "," << r.trial << "," << r.n << "," << r.m << ","
       << r.neighbor_fraction << "," << r.crypto_s << "," << r.mpc_build_s << "," << r.mpc_eval_s
       << "," << r.total_s << "," << r.comm_mb << "\n";
}

}  // namespace privimpute::harness
