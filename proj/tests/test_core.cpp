#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "flowcast/core.hpp"
#include "flowcast/timeutil.hpp"
#include "oracles.hpp"

using namespace flowcast;

namespace {

FlowSeries series_1d(const std::vector<double>& values, int64_t start_hour = 0) {
  FlowSeries fs;
  fs.values = Tensor::from({1, 1, static_cast<int64_t>(values.size())}, values);
  fs.start_hour = start_hour;
  fs.feature_names = {"pickup"};
  return fs;
}

}  // namespace

TEST_CASE("make_windows boundary: T = t1 + t2 yields exactly one sample") {
  FlowSeries fs = series_1d({0, 1, 2, 3, 4, 5, 6});
  auto windows = make_windows(fs, {6, 1, 1});
  REQUIRE(windows.size() == 1);
  CHECK(windows[0].y(0, 0, 0) == 6.0);
  CHECK(windows[0].anchor_hour == 6);
}

TEST_CASE("make_windows T=10 t1=6 t2=1: four samples anchored at hours 6..9") {
  // Hand enumeration on a 1-grid, 1-feature series: slices [k, k+6) / hour k+6.
  FlowSeries fs = series_1d({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto windows = make_windows(fs, {6, 1, 1});
  REQUIRE(windows.size() == 4);
  for (int64_t s = 0; s < 4; ++s) {
    CHECK(windows[static_cast<size_t>(s)].anchor_hour == 6 + s);
    for (int64_t t = 0; t < 6; ++t)
      CHECK(windows[static_cast<size_t>(s)].x(0, 0, t) == static_cast<double>(s + t));
    CHECK(windows[static_cast<size_t>(s)].y(0, 0, 0) == static_cast<double>(s + 6));
  }
}

TEST_CASE("make_windows rejects series shorter than t1 + t2") {
  FlowSeries fs = series_1d({0, 1, 2, 3, 4, 5});
  CHECK_THROWS_WITH_AS(make_windows(fs, {6, 1, 1}),
                       doctest::Contains("insufficient history"), std::invalid_argument);
}

TEST_CASE("window reconstruction: x followed by y reproduces the series slice") {
  std::mt19937_64 g(3);
  FlowSeries fs;
  fs.values = oracles::random_tensor(g, {3, 2, 20}, 0.0, 5.0);
  fs.start_hour = 48;
  fs.feature_names = {"pickup", "dropoff"};
  WindowSpec spec{5, 2, 3};
  auto windows = make_windows(fs, spec);
  REQUIRE(windows.size() == static_cast<size_t>((20 - 7) / 3 + 1));
  for (size_t s = 0; s < windows.size(); ++s) {
    const int64_t k = static_cast<int64_t>(s) * spec.stride;
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t f = 0; f < 2; ++f) {
        for (int64_t t = 0; t < spec.t1; ++t)
          CHECK(windows[s].x(i, f, t) == fs.values(i, f, k + t));
        for (int64_t t = 0; t < spec.t2; ++t)
          CHECK(windows[s].y(i, f, t) == fs.values(i, f, k + spec.t1 + t));
      }
  }
}

TEST_CASE("mae/rmse hand example: [1,2] vs [1,4]") {
  Tensor yt = Tensor::from({2, 1, 1}, {1, 2});
  Tensor yp = Tensor::from({2, 1, 1}, {1, 4});
  CHECK(mae(yt, yp) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rmse(yt, yp) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("mae/rmse are zero exactly when tensors agree on the masked region") {
  Tensor yt = Tensor::from({2, 1, 1}, {3, 5});
  CHECK(mae(yt, yt) == 0.0);
  CHECK(rmse(yt, yt) == 0.0);
  Tensor yp = Tensor::from({2, 1, 1}, {3, 9});
  std::vector<int64_t> mask{0};
  CHECK(mae(yt, yp, &mask) == 0.0);
  CHECK(mae(yt, yp) > 0.0);
}

TEST_CASE("metrics match a scalar-loop oracle on random tensors") {
  std::mt19937_64 g(11);
  Tensor yt = oracles::random_tensor(g, {3, 2, 1});
  Tensor yp = oracles::random_tensor(g, {3, 2, 1});
  CHECK(std::fabs(mae(yt, yp) - oracles::loop_mae(yt, yp)) < 1e-12);
  CHECK(std::fabs(rmse(yt, yp) - oracles::loop_rmse(yt, yp)) < 1e-12);
  std::vector<int64_t> mask{0, 2};
  CHECK(std::fabs(mae(yt, yp, &mask) - oracles::loop_mae(yt, yp, &mask)) < 1e-12);
  CHECK(std::fabs(rmse(yt, yp, &mask) - oracles::loop_rmse(yt, yp, &mask)) < 1e-12);
}

TEST_CASE("adding epsilon to a perfect prediction gives MAE = RMSE = epsilon") {
  std::mt19937_64 g(17);
  Tensor yt = oracles::random_tensor(g, {4, 2, 3});
  Tensor yp = yt;
  const double eps = 0.37;
  for (int64_t i = 0; i < yp.numel(); ++i) yp(i) += eps;
  CHECK(mae(yt, yp) == doctest::Approx(eps).epsilon(1e-12));
  CHECK(rmse(yt, yp) == doctest::Approx(eps).epsilon(1e-12));
}

TEST_CASE("mask of all nodes equals unmasked metrics") {
  std::mt19937_64 g(23);
  Tensor yt = oracles::random_tensor(g, {5, 2, 2});
  Tensor yp = oracles::random_tensor(g, {5, 2, 2});
  std::vector<int64_t> all{0, 1, 2, 3, 4};
  CHECK(mae(yt, yp, &all) == mae(yt, yp));
  CHECK(rmse(yt, yp, &all) == rmse(yt, yp));
}

TEST_CASE("metric shape mismatch and bad mask are rejected") {
  Tensor a({2, 1, 1});
  Tensor b({3, 1, 1});
  CHECK_THROWS_AS(mae(a, b), std::invalid_argument);
  std::vector<int64_t> bad{5};
  CHECK_THROWS_AS(rmse(a, a, &bad), std::invalid_argument);
}

TEST_CASE("FlowSeries invariants are enforced") {
  FlowSeries fs = series_1d({1, 2, 3});
  CHECK_NOTHROW(fs.validate());
  fs.values(1) = -1.0;
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
  fs.values(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
  fs.values(1) = 2.0;
  fs.feature_names = {};
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
}

TEST_CASE("FlowSeries directory round-trip is bit exact") {
  std::mt19937_64 g(29);
  FlowSeries fs;
  fs.values = oracles::random_tensor(g, {4, 2, 30}, 0.0, 7.0);
  // exercise non-representable decimals
  fs.values(0) = 0.1 + 0.2;
  fs.start_hour = timeutil::parse_datetime("2023-06-01 00:00:00") / 3600;
  fs.feature_names = {"pickup", "dropoff"};
  GraphSpec grid;
  grid.n_rows = 2;
  grid.n_cols = 2;
  grid.origin_lat = 40.65;
  grid.origin_lng = -74.0;
  grid.scheme = "rook4";
  grid.adjacency = Tensor::from({4, 4}, {0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0});

  const std::string dir = std::filesystem::temp_directory_path() / "flowcast_core_rt";
  std::filesystem::remove_all(dir);
  save_flow_series(dir, fs, grid);
  FlowSeries fs2;
  GraphSpec grid2;
  load_flow_series(dir, fs2, grid2);
  REQUIRE(fs2.values.shape() == fs.values.shape());
  for (int64_t i = 0; i < fs.values.numel(); ++i) CHECK(fs2.values(i) == fs.values(i));
  CHECK(fs2.start_hour == fs.start_hour);
  CHECK(fs2.feature_names == fs.feature_names);
  CHECK(grid2.n_rows == grid.n_rows);
  for (int64_t i = 0; i < 16; ++i) CHECK(grid2.adjacency(i) == grid.adjacency(i));
  std::filesystem::remove_all(dir);
}
