#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "privimpute/dataset.hpp"

using namespace privimpute;

TEST_CASE("load_table scales and handles missing cells", "[dataset]") {
  std::istringstream in("a,b\n1.5,2.0\n3.0,\n");
  Table t = load_table_stream(in, 10);
  REQUIRE(t.n == 2);
  REQUIRE(t.m == 2);
  CHECK(t.at(0, 0) == 15);
  CHECK(t.at(0, 1) == 20);
  CHECK(t.at(1, 0) == 30);
  CHECK_FALSE(t.has(1, 1));
}

TEST_CASE("load_table rejects empty input", "[dataset]") {
  std::istringstream empty("");
  CHECK_THROWS_AS(load_table_stream(empty, 10), ParseError);
  std::istringstream header_only("a,b\n");
  CHECK_THROWS_AS(load_table_stream(header_only, 10), ParseError);
}

TEST_CASE("load_table overflow at configured bit width", "[dataset]") {
  std::istringstream in("a,b\n1e12,1\n");
  CHECK_THROWS_AS(load_table_stream(in, 1000000, 32), ParseError);
}

TEST_CASE("load_table dictionary-encodes categoricals", "[dataset]") {
  std::istringstream in("a,b\nred,1\nblue,2\nred,\n");
  Table t = load_table_stream(in, 10);
  CHECK(t.kinds[0] == AttrKind::categorical);
  CHECK(t.kinds[1] == AttrKind::numerical);
  CHECK(t.at(0, 0) == t.at(2, 0));
  CHECK(t.at(0, 0) != t.at(1, 0));
  CHECK(t.dicts[0].size() == 2);
}

static Table small_numeric(size_t n, u64 seed = 7) {
  Table t;
  t.n = n;
  t.m = 3;
  t.scale = 1;
  t.kinds.assign(3, AttrKind::numerical);
  t.names = {"a", "b", "c"};
  t.dicts.resize(3);
  t.vals.assign(n * 3, 0);
  t.present.assign(n * 3, 0);
  Rng rng(seed);
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < 3; j++) t.set(i, j, i64(rng.below(1000)));
  return t;
}

TEST_CASE("inject_missing MCAR with fraction 1 drops everything", "[dataset]") {
  Table t = small_numeric(50);
  MissingnessSpec spec;
  spec.fraction = 1.0;
  spec.target_column = 1;
  auto [out, gt] = inject_missing(t, spec);
  CHECK(gt.dropped.size() == 50);
  for (size_t i = 0; i < t.n; i++) CHECK_FALSE(out.has(i, 1));
  for (auto [row, v] : gt.dropped) CHECK(v == t.at(row, 1));
}

TEST_CASE("inject_missing MCAR drop count lands in the binomial 99% band", "[dataset]") {
  Table t = small_numeric(10000);
  MissingnessSpec spec;
  spec.fraction = 0.10;
  spec.target_column = 0;
  spec.seed = 42;
  auto [out, gt] = inject_missing(t, spec);
  // 99% central band of Binomial(10000, 0.1), computed with scipy
  CHECK(gt.dropped.size() >= 923);
  CHECK(gt.dropped.size() <= 1078);
}

TEST_CASE("inject_missing is reproducible per seed", "[dataset]") {
  Table t = small_numeric(500);
  MissingnessSpec spec;
  spec.fraction = 0.2;
  spec.target_column = 2;
  spec.seed = 99;
  auto [a, ga] = inject_missing(t, spec);
  auto [b, gb] = inject_missing(t, spec);
  CHECK(ga.dropped == gb.dropped);
  CHECK(a.present == b.present);
  spec.seed = 100;
  auto [c, gc] = inject_missing(t, spec);
  CHECK(ga.dropped != gc.dropped);
}

TEST_CASE("inject_missing MNAR respects the percentile window", "[dataset]") {
  // target column is a permutation of 0..99; only values in [40th, 60th)
  // percentile may be dropped
  Table t;
  t.n = 100;
  t.m = 2;
  t.scale = 1;
  t.kinds.assign(2, AttrKind::numerical);
  t.names = {"a", "b"};
  t.dicts.resize(2);
  t.vals.assign(200, 0);
  t.present.assign(200, 0);
  std::vector<i64> perm(100);
  for (i64 i = 0; i < 100; i++) perm[size_t(i)] = i;
  Rng rng(3);
  rng.shuffle(perm);
  for (size_t i = 0; i < 100; i++) {
    t.set(i, 0, perm[i]);
    t.set(i, 1, i64(i));
  }
  MissingnessSpec spec;
  spec.pattern = MissPattern::MNAR;
  spec.fraction = 0.10;
  spec.target_column = 0;
  spec.percentile_bounds = {{40.0, 60.0}};
  spec.seed = 5;
  auto [out, gt] = inject_missing(t, spec);
  REQUIRE(gt.dropped.size() == 10);
  for (auto [row, v] : gt.dropped) {
    // brute-force oracle: the 40th/60th percentile thresholds of 0..99
    CHECK(v >= 40);
    CHECK(v < 60);
  }
}

TEST_CASE("inject_missing MAR keys on the driver column", "[dataset]") {
  Table t = small_numeric(200, 11);
  MissingnessSpec spec;
  spec.pattern = MissPattern::MAR;
  spec.fraction = 0.10;
  spec.target_column = 0;
  spec.driver_column = 1;
  spec.percentile_bounds = {{10.0, 90.0}};
  spec.seed = 8;
  auto [out, gt] = inject_missing(t, spec);
  CHECK(gt.dropped.size() == 20);
  // every dropped row's driver value lies inside the window (brute check)
  std::vector<i64> drv;
  for (size_t i = 0; i < t.n; i++) drv.push_back(t.at(i, 1));
  std::sort(drv.begin(), drv.end());
  i64 lo = drv[size_t(0.10 * 200)], hi = drv[size_t(0.90 * 200)];
  for (auto [row, v] : gt.dropped) {
    CHECK(t.at(row, 1) >= lo);
    CHECK(t.at(row, 1) < hi);
  }
  CHECK_THROWS_AS(
      [&] {
        MissingnessSpec bad = spec;
        bad.driver_column = bad.target_column;
        return inject_missing(t, bad);
      }(),
      ConfigError);
}

TEST_CASE("MCAR drops are uncorrelated with a driver column", "[dataset]") {
  Table t = small_numeric(400, 21);
  double sum_xy = 0, sum_x = 0, sum_y = 0, sum_x2 = 0, sum_y2 = 0;
  size_t n = 0;
  for (u64 seed = 0; seed < 1000; seed++) {
    MissingnessSpec spec;
    spec.fraction = 0.10;
    spec.target_column = 0;
    spec.seed = seed;
    auto [out, gt] = inject_missing(t, spec);
    std::vector<u8> dropped(t.n, 0);
    for (auto [row, v] : gt.dropped) dropped[row] = 1;
    for (size_t i = 0; i < t.n; i++) {
      double x = double(dropped[i]);
      double y = double(t.at(i, 1));
      sum_xy += x * y;
      sum_x += x;
      sum_y += y;
      sum_x2 += x * x;
      sum_y2 += y * y;
      n++;
    }
  }
  double num = double(n) * sum_xy - sum_x * sum_y;
  double den = std::sqrt(double(n) * sum_x2 - sum_x * sum_x) *
               std::sqrt(double(n) * sum_y2 - sum_y * sum_y);
  CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("horizontal split partitions rows", "[dataset]") {
  Table t = small_numeric(4);
  SplitSpec spec{SplitSpec::Mode::horizontal, 0.5, 0, 7};
  auto res = split(t, spec);
  CHECK(res.alice.n == 2);
  CHECK(res.bob.n == 2);
  std::vector<size_t> all = res.alice_rows;
  all.insert(all.end(), res.bob_rows.begin(), res.bob_rows.end());
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<size_t>{0, 1, 2, 3});
  // reassembly reproduces the table
  for (size_t i = 0; i < res.alice_rows.size(); i++)
    for (size_t j = 0; j < t.m; j++) CHECK(res.alice.at(i, j) == t.at(res.alice_rows[i], j));
}

TEST_CASE("vertical split puts beta on Bob's side", "[dataset]") {
  Table t = small_numeric(5);
  t.m = 3;
  SplitSpec spec{SplitSpec::Mode::vertical, 0.0, 2, 1};
  auto res = split(t, spec, 2);
  CHECK(res.alice.m == 2);
  CHECK(res.bob.m == 1);
  CHECK_THROWS_AS(split(t, spec, 1), ConfigError);  // beta on Alice's side
  SplitSpec bad{SplitSpec::Mode::vertical, 0.0, 3, 1};
  CHECK_THROWS_AS(split(t, bad, 2), ConfigError);  // invalid cut
}

TEST_CASE("table round-trips through csv", "[dataset]") {
  Table t = small_numeric(20, 5);
  t.clear_cell(3, 1);
  std::ostringstream os;
  save_table_stream(t, os);
  std::istringstream in(os.str());
  Table u = load_table_stream(in, t.scale);
  REQUIRE(u.n == t.n);
  REQUIRE(u.m == t.m);
  for (size_t i = 0; i < t.n; i++)
    for (size_t j = 0; j < t.m; j++) {
      CHECK(u.has(i, j) == t.has(i, j));
      if (t.has(i, j)) CHECK(u.at(i, j) == t.at(i, j));
    }
}
