// privimpute: two-party private radius-nearest-neighbor imputation toolkit.
//
// Subcommands: gen, inject, radii, eval, bench, horizontal, vertical,
// triples. The horizontal/vertical subcommands run one party of a protocol
// session over TCP; everything else is local tooling.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "privimpute/harness.hpp"

using namespace privimpute;

namespace {

double parse_epsilon(const std::string& s) {
  if (s.rfind("2^", 0) == 0) return std::exp2(std::stod(s.substr(2)));
  return std::stod(s);
}

std::pair<std::string, u16> parse_addr(const std::string& addr) {
  auto pos = addr.rfind(':');
  if (pos == std::string::npos) throw ConfigError("--addr must be host:port");
  return {addr.substr(0, pos), u16(std::stoi(addr.substr(pos + 1)))};
}

std::unique_ptr<net::Channel> open_channel(int party, const std::string& addr, int timeout_ms) {
  auto [host, port] = parse_addr(addr);
  // Bob listens, Alice connects
  if (party == 1) return net::SocketChannel::listen(port, timeout_ms);
  return net::SocketChannel::connect(host, port, timeout_ms);
}

void write_transcript(net::Channel& ch, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  out << ch.transcript_csv();
}

MissPattern parse_pattern(const std::string& s) {
  if (s == "mcar" || s == "MCAR") return MissPattern::MCAR;
  if (s == "mar" || s == "MAR") return MissPattern::MAR;
  if (s == "mnar" || s == "MNAR") return MissPattern::MNAR;
  throw ConfigError("pattern must be mcar|mar|mnar");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-party private r-NN data imputation"};
  app.set_config("--config");
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic benchmark table");
  size_t gen_n = 1000, gen_m = 5;
  double gen_frac = 0.01;
  i64 gen_radius = 1000;
  u64 gen_seed = 1;
  std::string gen_out = "synthetic.csv", gen_radii_out;
  gen->add_option("--n", gen_n, "tuple count");
  gen->add_option("--m", gen_m, "attribute count");
  gen->add_option("--neighbor-frac", gen_frac, "fraction of planted neighbors");
  gen->add_option("--radius", gen_radius, "quantization radius (even)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output table path");
  gen->add_option("--radii-out", gen_radii_out, "also emit a radii file");

  // ---- inject ----
  auto* inject = app.add_subcommand("inject", "inject missing values into a table");
  std::string inj_data, inj_out = "corrupted.csv", inj_truth = "ground_truth.csv";
  std::string inj_pattern = "mcar";
  double inj_fraction = 0.10;
  size_t inj_target = 0;
  i64 inj_driver = -1;
  std::vector<double> inj_pct;
  u64 inj_seed = 1;
  i64 inj_scale = 1000;
  inject->add_option("--data", inj_data, "input table")->required();
  inject->add_option("--pattern", inj_pattern, "mcar|mar|mnar");
  inject->add_option("--fraction", inj_fraction, "missingness fraction (0,1]");
  inject->add_option("--target-col", inj_target, "column to corrupt");
  inject->add_option("--driver-col", inj_driver, "MAR driver column");
  inject->add_option("--pct", inj_pct, "percentile bounds lo hi (MAR/MNAR)")->expected(2);
  inject->add_option("--seed", inj_seed, "seed");
  inject->add_option("--scale", inj_scale, "fixed-point scale");
  inject->add_option("--out", inj_out, "corrupted table path");
  inject->add_option("--truth-out", inj_truth, "ground truth path");

  // ---- radii ----
  auto* radii = app.add_subcommand("radii", "adaptive per-attribute radius search");
  std::string rad_data, rad_out = "radii.csv";
  size_t rad_beta = 0;
  u64 rad_seed = 1;
  i64 rad_scale = 1000;
  size_t rad_iters = 50;
  radii->add_option("--data", rad_data, "training table")->required();
  radii->add_option("--beta", rad_beta, "query attribute index")->required();
  radii->add_option("--seed", rad_seed, "seed");
  radii->add_option("--scale", rad_scale, "fixed-point scale");
  radii->add_option("--max-iterations", rad_iters, "search budget per attribute");
  radii->add_option("--out", rad_out, "radii file path");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "accuracy harness (25x25 grid by default)");
  std::string ev_data, ev_out = "eval.csv", ev_pattern = "mcar";
  size_t ev_beta = 0, ev_sreps = 25, ev_mreps = 25, ev_k = 5, ev_malice = 0;
  double ev_fraction = 0.10, ev_share = 0.5;
  u64 ev_seed = 1;
  i64 ev_scale = 1000;
  std::vector<std::string> ev_methods = {"rnn_full", "knn_full", "knn_vertical_local",
                                         "knn_horizontal_local"};
  eval->add_option("--data", ev_data, "dataset")->required();
  eval->add_option("--beta", ev_beta, "imputed attribute")->required();
  eval->add_option("--pattern", ev_pattern, "mcar|mar|mnar");
  eval->add_option("--fraction", ev_fraction, "missingness fraction");
  eval->add_option("--split-reps", ev_sreps, "split repetitions");
  eval->add_option("--miss-reps", ev_mreps, "missingness re-samples");
  eval->add_option("--methods", ev_methods, "methods to run");
  eval->add_option("--alice-share", ev_share, "horizontal row share");
  eval->add_option("--m-alice", ev_malice, "vertical cut (default m/2)");
  eval->add_option("--k", ev_k, "k for the k-NN baselines");
  eval->add_option("--seed", ev_seed, "seed");
  eval->add_option("--scale", ev_scale, "fixed-point scale");
  eval->add_option("--out", ev_out, "results CSV");

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "protocol timing/communication benchmark");
  harness::BenchPlan bplan;
  std::string bench_out = "bench.csv", bench_eps = "2^-40";
  bench_cmd->add_option("--n", bplan.n, "tuple count");
  bench_cmd->add_option("--m", bplan.m, "attribute count");
  bench_cmd->add_option("--neighbor-frac", bplan.neighbor_fraction, "neighbor fraction");
  bench_cmd->add_option("--variants", bplan.variants,
                        "h-plain-mean h-plain-random h-blind-mean h-blind-random v-plain "
                        "v-blind-mean v-blind-random");
  bench_cmd->add_option("--trials", bplan.trials, "trials per variant");
  bench_cmd->add_option("--radius", bplan.radius, "quantization radius");
  bench_cmd->add_option("--seed", bplan.seed, "seed");
  bench_cmd->add_option("--pad", bplan.pad_rho, "vertical padding fraction");
  bench_cmd->add_option("--pad-count", bplan.pad_count, "vertical padding granularity override");
  bench_cmd->add_option("--epsilon", bench_eps, "blind-random failure bound (e.g. 2^-40)");
  bench_cmd->add_option("--out", bench_out, "CSV path");

  // ---- horizontal ----
  auto* hor = app.add_subcommand("horizontal", "run one party of a horizontal session");
  std::string h_role, h_variant = "blind-mean", h_addr = "127.0.0.1:7766";
  std::string h_data, h_radii, h_transcript, h_eps = "2^-40";
  size_t h_beta = 0, h_alpha = 0;
  double h_ell = 0.01;
  u64 h_seed = 1;
  i64 h_scale = 1000;
  int h_timeout = 120000;
  hor->add_option("--role", h_role, "alice|bob")->required();
  hor->add_option("--variant", h_variant, "plain-mean|plain-random|blind-mean|blind-random");
  hor->add_option("--addr", h_addr, "host:port (Bob listens)");
  hor->add_option("--data", h_data, "party view table")->required();
  hor->add_option("--radii", h_radii, "radii file")->required();
  hor->add_option("--beta", h_beta, "imputed attribute")->required();
  hor->add_option("--alpha", h_alpha, "Bob-local row of the query tuple");
  hor->add_option("--epsilon", h_eps, "blind-random failure bound");
  hor->add_option("--ell-frac", h_ell, "expected neighbor fraction among Alice's tuples");
  hor->add_option("--seed", h_seed, "session seed");
  hor->add_option("--scale", h_scale, "fixed-point scale");
  hor->add_option("--timeout-ms", h_timeout, "channel timeout");
  hor->add_option("--transcript", h_transcript, "write transcript CSV here");

  // ---- vertical ----
  auto* ver = app.add_subcommand("vertical", "run one party of a vertical session");
  std::string v_role, v_variant = "blind-mean", v_addr = "127.0.0.1:7766";
  std::string v_data, v_radii, v_transcript, v_psi = "oprf";
  size_t v_alpha = 0, v_beta = 0;
  double v_pad = 0.05;
  u64 v_pad_count = 0, v_seed = 1;
  i64 v_scale = 1000;
  int v_timeout = 120000;
  bool v_random = false;
  ver->add_option("--role", v_role, "alice|bob")->required();
  ver->add_option("--variant", v_variant, "plain|blind-mean|blind-random");
  ver->add_option("--addr", v_addr, "host:port (Bob listens)");
  ver->add_option("--data", v_data, "party view table")->required();
  ver->add_option("--radii", v_radii, "radii file for the party's own columns")->required();
  ver->add_option("--alpha", v_alpha, "query row index")->required();
  ver->add_option("--beta", v_beta, "Bob-local imputed attribute (bob only)");
  ver->add_option("--pad", v_pad, "padding fraction of n");
  ver->add_option("--pad-count", v_pad_count, "padding granularity override");
  ver->add_option("--psi", v_psi, "oprf|dh (plain variant backend)");
  ver->add_flag("--random", v_random, "plain variant: sample instead of mean");
  ver->add_option("--seed", v_seed, "session seed");
  ver->add_option("--scale", v_scale, "fixed-point scale");
  ver->add_option("--timeout-ms", v_timeout, "channel timeout");
  ver->add_option("--transcript", v_transcript, "write transcript CSV here");

  // ---- triples ----
  auto* triples = app.add_subcommand("triples", "generate Beaver triple share files");
  u64 t_count = 1 << 20, t_seed = 1;
  u32 t_ring = 64;
  std::string t_out_a = "triples_alice.bin", t_out_b = "triples_bob.bin";
  triples->add_option("--count", t_count, "triple count");
  triples->add_option("--ring-bits", t_ring, "64 (arithmetic) or 1 (boolean)");
  triples->add_option("--seed", t_seed, "seed");
  triples->add_option("--out-alice", t_out_a, "Alice share file");
  triples->add_option("--out-bob", t_out_b, "Bob share file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      harness::SyntheticSpec spec{gen_n, gen_m, gen_frac, gen_radius, gen_seed};
      Table t = harness::gen_synthetic(spec);
      save_table(t, gen_out);
      if (!gen_radii_out.empty()) {
        std::vector<i64> rs(gen_m, gen_radius);
        save_radii(make_radii_file(t, rs), gen_radii_out);
      }
      std::cout << "wrote " << gen_out << " (n=" << t.n << ", m=" << t.m
                << ", query row 0, beta=" << gen_m - 1 << ")\n";
    } else if (*inject) {
      Table t = load_table(inj_data, inj_scale);
      MissingnessSpec spec;
      spec.pattern = parse_pattern(inj_pattern);
      spec.fraction = inj_fraction;
      spec.target_column = inj_target;
      if (inj_driver >= 0) spec.driver_column = size_t(inj_driver);
      if (!inj_pct.empty()) spec.percentile_bounds = {{inj_pct[0], inj_pct[1]}};
      spec.seed = inj_seed;
      auto [out, gt] = inject_missing(t, spec);
      save_table(out, inj_out);
      save_ground_truth(gt, t.scale, inj_truth);
      std::cout << "dropped " << gt.dropped.size() << " cells -> " << inj_out << ", "
                << inj_truth << "\n";
    } else if (*radii) {
      Table t = load_table(rad_data, rad_scale);
      RadiusSearchConfig cfg;
      cfg.seed = rad_seed;
      cfg.max_iterations = rad_iters;
      auto res = search_radii(t, rad_beta, cfg);
      save_radii(make_radii_file(t, res.radii), rad_out);
      std::cout << "wrote " << rad_out << "\n";
      for (size_t j = 0; j < t.m; j++)
        std::cout << "  " << t.names[j] << ": r=" << res.radii[j]
                  << (res.degenerate[j] ? " (zero variance)" : "") << "\n";
    } else if (*eval) {
      harness::EvalPlan plan;
      plan.base = load_table(ev_data, ev_scale);
      plan.beta = ev_beta;
      plan.pattern = parse_pattern(ev_pattern);
      plan.fraction = ev_fraction;
      plan.split_reps = ev_sreps;
      plan.miss_reps = ev_mreps;
      plan.methods = ev_methods;
      plan.alice_share = ev_share;
      plan.m_alice = ev_malice;
      plan.knn_k = ev_k;
      plan.seed = ev_seed;
      auto res = harness::eval_accuracy(plan);
      std::ofstream out(ev_out);
      harness::write_eval_csv(res, out);
      std::cout << "wrote " << ev_out << "\n";
      for (const auto& s : res.summaries)
        std::cout << "  " << s.method << ": mean RMSE " << s.mean_rmse << " [" << s.ci_lo << ", "
                  << s.ci_hi << "], scaled " << s.scaled_pct << "%\n";
    } else if (*bench_cmd) {
      bplan.epsilon = parse_epsilon(bench_eps);
      auto rows = harness::bench(bplan);
      std::ofstream out(bench_out);
      harness::write_bench_csv(rows, out);
      std::cout << harness::bench_csv_header() << "\n";
      for (const auto& r : rows)
        std::cout << r.split << "," << r.variant << "," << r.trial << "," << r.n << "," << r.m
                  << "," << r.neighbor_fraction << "," << r.crypto_s << "," << r.mpc_build_s
                  << "," << r.mpc_eval_s << "," << r.total_s << "," << r.comm_mb << "\n";
    } else if (*hor) {
      proto::HorizontalConfig cfg;
      cfg.variant = h_variant == "plain-mean"     ? proto::Variant::h_plain_mean
                    : h_variant == "plain-random" ? proto::Variant::h_plain_random
                    : h_variant == "blind-mean"   ? proto::Variant::h_blind_mean
                    : h_variant == "blind-random"
                        ? proto::Variant::h_blind_random
                        : throw ConfigError("unknown horizontal variant: " + h_variant);
      cfg.beta = h_beta;
      RadiiFile rf = load_radii(h_radii);
      cfg.scheme = rf.scheme();
      cfg.bounds = rf.bounds;
      cfg.epsilon = parse_epsilon(h_eps);
      cfg.ell_frac = h_ell;
      cfg.seed = h_seed;
      Table view = load_table(h_data, h_scale);
      int party = h_role == "alice" ? 0 : 1;
      auto ch = open_channel(party, h_addr, h_timeout);
      if (party == 0) {
        proto::run_horizontal_alice(cfg, view, *ch);
        std::cout << "alice: session complete\n";
      } else {
        auto out = proto::run_horizontal_bob(cfg, view, h_alpha, *ch);
        if (out.result.value)
          std::cout << "imputed value: " << double(*out.result.value) / double(h_scale) << "\n";
        else
          std::cout << (out.result.no_valid_slot ? "no valid slot (aborted)\n"
                                                 : "no neighbor found\n");
      }
      write_transcript(*ch, h_transcript);
    } else if (*ver) {
      proto::VerticalConfig cfg;
      cfg.variant = v_variant == "plain"        ? proto::Variant::v_plain
                    : v_variant == "blind-mean" ? proto::Variant::v_blind_mean
                    : v_variant == "blind-random"
                        ? proto::Variant::v_blind_random
                        : throw ConfigError("unknown vertical variant: " + v_variant);
      cfg.alpha = v_alpha;
      cfg.beta_local = v_beta;
      RadiiFile rf = load_radii(v_radii);
      cfg.scheme = rf.scheme();
      cfg.pad_rho = v_pad;
      cfg.pad_count = v_pad_count;
      cfg.psi = v_psi == "dh" ? proto::PsiBackend::dh : proto::PsiBackend::oprf;
      cfg.random_mode = v_random;
      cfg.seed = v_seed;
      Table view = load_table(v_data, v_scale);
      int party = v_role == "alice" ? 0 : 1;
      auto ch = open_channel(party, v_addr, v_timeout);
      if (party == 0) {
        proto::run_vertical_alice(cfg, view, *ch);
        std::cout << "alice: session complete\n";
      } else {
        auto out = proto::run_vertical_bob(cfg, view, *ch);
        if (out.result.value)
          std::cout << "imputed value: " << double(*out.result.value) / double(v_scale) << "\n";
        else
          std::cout << "no neighbor found\n";
      }
      write_transcript(*ch, v_transcript);
    } else if (*triples) {
      mpc::generate_triple_files(t_seed, t_ring, t_count, t_out_a, t_out_b);
      std::cout << "wrote " << t_out_a << " and " << t_out_b << " (" << t_count << " triples, "
                << t_ring << "-bit ring)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
