#include "rscope/sensing.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

using namespace rscope;

namespace {

SensingConfig base_config(SensingKind kind, Index p, Index n,
                          std::uint64_t seed = 17) {
  SensingConfig cfg;
  cfg.kind = kind;
  cfg.p = p;
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("point sensing rows are distinct one-hot selectors") {
  const auto op = make_sensing(base_config(SensingKind::Point, 12, 100));
  REQUIRE(op.p() == 12);
  REQUIRE(op.n() == 100);
  std::set<Index> seen;
  for (Index i = 0; i < op.p(); ++i) {
    Index hot = -1;
    for (Index j = 0; j < op.n(); ++j) {
      const double v = op.matrix(i, j);
      if (v == 1.0) {
        CHECK(hot == -1);
        hot = j;
      } else {
        CHECK(v == 0.0);
      }
    }
    REQUIRE(hot >= 0);
    CHECK(!seen.count(hot));
    seen.insert(hot);
    CHECK(op.sensor_indices[static_cast<std::size_t>(i)] == hot);
  }
}

TEST_CASE("point sensing honors explicit indices and validates them") {
  auto cfg = base_config(SensingKind::Point, 3, 10);
  cfg.indices = {7, 2, 9};
  const auto op = make_sensing(cfg);
  CHECK(op.matrix(0, 7) == 1.0);
  CHECK(op.matrix(1, 2) == 1.0);
  CHECK(op.matrix(2, 9) == 1.0);

  cfg.indices = {7, 7, 9};
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);
  cfg.indices = {7, 10, 9};
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);
  cfg.indices = {1, 2};
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);  // p disagrees with list
}

TEST_CASE("point sensing is deterministic in the seed") {
  const auto a = make_sensing(base_config(SensingKind::Point, 9, 64, 5));
  const auto b = make_sensing(base_config(SensingKind::Point, 9, 64, 5));
  const auto c = make_sensing(base_config(SensingKind::Point, 9, 64, 6));
  CHECK(a.matrix == b.matrix);
  CHECK(a.matrix != c.matrix);
}

TEST_CASE("requesting more point sensors than states fails loudly") {
  CHECK_THROWS_AS(make_sensing(base_config(SensingKind::Point, 11, 10)),
                  ArgumentError);
}

TEST_CASE("boundary sensing picks ring nodes at the requested offset") {
  auto cfg = base_config(SensingKind::Boundary, 4, 0);
  cfg.grid = FieldGrid(6, 5, {"q"}, {1.0});
  cfg.n = cfg.grid->state_dim();
  cfg.groups = {SensorGroup{{"q"}, 4, 0}};
  const auto op = make_sensing(cfg);
  REQUIRE(op.p() == 4);
  for (const Index idx : op.sensor_indices) {
    const Index ix = idx % 6;
    const Index iy = idx / 6;
    const Index ring = std::min(std::min(ix, 5 - ix), std::min(iy, 4 - iy));
    CHECK(ring == 0);
  }

  // Offset 1 selects the first interior ring.
  cfg.groups = {SensorGroup{{"q"}, 3, 1}};
  cfg.p = 3;
  const auto inner = make_sensing(cfg);
  for (const Index idx : inner.sensor_indices) {
    const Index ix = idx % 6;
    const Index iy = idx / 6;
    const Index ring = std::min(std::min(ix, 5 - ix), std::min(iy, 4 - iy));
    CHECK(ring == 1);
  }
}

TEST_CASE("boundary sensing addresses the right field block") {
  auto cfg = base_config(SensingKind::Boundary, 6, 0);
  cfg.grid = FieldGrid(5, 5, {"a", "b"}, {1.0, 1.0});
  cfg.n = cfg.grid->state_dim();
  cfg.groups = {SensorGroup{{"b"}, 6, 0}};
  const auto op = make_sensing(cfg);
  for (const Index idx : op.sensor_indices) {
    CHECK(idx >= 25);  // second field occupies components [25, 50)
    CHECK(idx < 50);
  }
}

TEST_CASE("boundary sensing validation") {
  auto cfg = base_config(SensingKind::Boundary, 4, 36);
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);  // no grid
  cfg.grid = FieldGrid(6, 6, {"q"}, {1.0});
  cfg.groups = {SensorGroup{{"nope"}, 4, 0}};
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);  // unknown field
  cfg.groups = {SensorGroup{{"q"}, 4, 3}};
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);  // ring 3 empty on 6x6
  cfg.groups = {SensorGroup{{"q"}, 50, 0}};
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);  // ring has only 20 nodes
}

TEST_CASE("gaussian sensing matches its distribution") {
  const Index p = 40, n = 500;
  const auto op = make_sensing(base_config(SensingKind::Gaussian, p, n, 3));
  // Entries drawn N(0, 1/p): the sample variance over 20000 entries lands
  // within a few percent, and columns have near-unit norm in expectation.
  const double mean = op.matrix.mean();
  const double var = (op.matrix.array() - mean).square().sum() / (p * n - 1.0);
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0 / p) < 0.1 / p);
  double col_norm_avg = 0.0;
  for (Index j = 0; j < n; ++j) col_norm_avg += op.matrix.col(j).norm();
  CHECK(std::abs(col_norm_avg / n - 1.0) < 0.1);
}

TEST_CASE("bernoulli sensing entries are +-1/sqrt(p)") {
  const Index p = 16, n = 200;
  const auto op = make_sensing(base_config(SensingKind::Bernoulli, p, n, 9));
  const double mag = 1.0 / std::sqrt(static_cast<double>(p));
  Index plus = 0;
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < n; ++j) {
      CHECK(std::abs(std::abs(op.matrix(i, j)) - mag) < 1e-15);
      if (op.matrix(i, j) > 0) ++plus;
    }
  // Signs are balanced to within binomial noise.
  const double frac = static_cast<double>(plus) / (p * n);
  CHECK(std::abs(frac - 0.5) < 0.05);
}

TEST_CASE("identity sensing is the identity") {
  const auto op = make_sensing(base_config(SensingKind::Identity, 30, 30));
  CHECK(op.matrix == Mat::Identity(30, 30));
  CHECK(op.sensor_indices.size() == 30);
}

TEST_CASE("tomographic rows sum along whole grid lines") {
  auto cfg = base_config(SensingKind::Tomographic, 7, 0);
  cfg.grid = FieldGrid(4, 3, {"q"}, {1.0});
  cfg.n = cfg.grid->state_dim();  // 12; catalogue holds 3 + 4 = 7 lines
  const auto op = make_sensing(cfg);
  REQUIRE(op.p() == 7);
  std::set<std::vector<Index>> supports;
  for (Index i = 0; i < 7; ++i) {
    std::vector<Index> support;
    for (Index j = 0; j < 12; ++j) {
      const double v = op.matrix(i, j);
      CHECK((v == 0.0 || v == 1.0));
      if (v == 1.0) support.push_back(j);
    }
    // Every support is either a full row (4 nodes sharing iy) or a full
    // column (3 nodes sharing ix) of the grid.
    if (support.size() == 4) {
      const Index iy = support.front() / 4;
      for (const Index j : support) CHECK(j / 4 == iy);
    } else {
      REQUIRE(support.size() == 3);
      const Index ix = support.front() % 4;
      for (const Index j : support) CHECK(j % 4 == ix);
    }
    supports.insert(std::move(support));
  }
  CHECK(supports.size() == 7);  // p = catalogue size, so every line once

  cfg.p = 8;
  CHECK_THROWS_AS(make_sensing(cfg), ArgumentError);  // more rays than lines
}

TEST_CASE("sensing kind string roundtrip") {
  for (const auto kind :
       {SensingKind::Point, SensingKind::Boundary, SensingKind::Gaussian,
        SensingKind::Bernoulli, SensingKind::Identity,
        SensingKind::Tomographic}) {
    CHECK(sensing_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(sensing_kind_from_string("sonar"), ArgumentError);
}

TEST_CASE("block diagonal lift applies the operator per block") {
  Rng rng(23);
  auto op = make_sensing(base_config(SensingKind::Gaussian, 3, 8, 23));
  const BlockDiagLift lift = block_diag_lift(op, 2);  // three time blocks
  REQUIRE(lift.rows() == 9);
  REQUIRE(lift.cols() == 24);
  const Vec x = rng.gaussian_vector(24);
  const Vec y = lift.apply(x);
  for (int b = 0; b < 3; ++b) {
    const Vec expect = op.matrix * x.segment(8 * b, 8);
    CHECK((y.segment(3 * b, 3) - expect).norm() < 1e-14);
  }
  // Dense materialization agrees with apply.
  CHECK((y - lift.dense() * x).norm() < 1e-13);
  CHECK_THROWS_AS(lift.apply(Vec::Zero(23)), DimensionError);
  CHECK_THROWS_AS(block_diag_lift(op, -1), ArgumentError);
}

TEST_CASE("measurement hits the requested noise level exactly") {
  Rng rng(31);
  Mat window(50, 3);
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 50; ++i) window(i, j) = rng.gaussian();
  const auto op = make_sensing(base_config(SensingKind::Gaussian, 10, 50, 2));

  Vec clean(30);
  for (Index b = 0; b < 3; ++b)
    clean.segment(10 * b, 10) = op.matrix * window.col(b);

  for (const double snr_db : {0.0, 10.0, 20.0, 40.0}) {
    const Measurement m = measure(op, window, snr_db, 777);
    REQUIRE(m.values.size() == 30);  // p * (j + 1)
    CHECK(m.depth == 2);
    const double noise = (m.values - clean).norm();
    const double target = clean.norm() * std::pow(10.0, -snr_db / 20.0);
    CHECK(std::abs(noise - target) <= 1e-12 * clean.norm());
  }

  // Same seed, same bytes; different seed, different noise.
  const Measurement m1 = measure(op, window, 20.0, 42);
  const Measurement m2 = measure(op, window, 20.0, 42);
  const Measurement m3 = measure(op, window, 20.0, 43);
  CHECK(m1.values == m2.values);
  CHECK(m1.values != m3.values);
}

TEST_CASE("measurement validates its window") {
  const auto op = make_sensing(base_config(SensingKind::Identity, 5, 5));
  CHECK_THROWS_AS(measure(op, Mat::Ones(4, 2), 20.0, 1), DimensionError);
  CHECK_THROWS_AS(measure(op, Mat::Zero(5, 3), 20.0, 1), NumericalError);
  // Noiseless zero window is fine; calibration is what needs a signal.
  const Measurement m = measure(op, Mat::Zero(5, 3));
  CHECK(m.values.norm() == 0.0);
}

TEST_CASE("noiseless measurement is the exact stack") {
  const auto op = make_sensing(base_config(SensingKind::Identity, 4, 4));
  Mat window(4, 2);
  window << 1, 5, 2, 6, 3, 7, 4, 8;
  const Measurement m = measure(op, window);
  REQUIRE(m.values.size() == 8);
  CHECK(m.values.head(4) == window.col(0));
  CHECK(m.values.tail(4) == window.col(1));
}
