#include <doctest.h>

#include <cmath>
#include <random>

#include "climsom/error.hpp"
#include "climsom/som.hpp"
#include "climsom/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace climsom;

namespace {

SampleMatrix small_samples(std::uint64_t seed) {
  auto const data = normalize_per_month(generate_synthetic_ensemble(fixture::small_recipe(), seed));
  return flatten_samples(data, MonthFilter::all());
}

SomConfig config_of(int rows, int cols, std::int64_t iterations, std::uint64_t seed) {
  SomConfig c;
  c.rows = rows;
  c.cols = cols;
  c.iterations = iterations;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("default radii") {
  SomConfig c;
  CHECK(c.rows == 30);
  CHECK(c.cols == 30);
  CHECK(c.sigma_initial() == doctest::Approx(30 * std::sqrt(0.03)));
  CHECK(c.sigma_initial() == doctest::Approx(5.1962).epsilon(1e-4));
  CHECK(c.sigma_final() == doctest::Approx(1.0392).epsilon(1e-4));
  SomConfig r;
  r.rows = 4;
  r.cols = 9;
  CHECK(r.lattice_dim() == doctest::Approx(6));
}

TEST_CASE("schedules are linear and exact at both ends") {
  auto c = config_of(10, 10, 101, 0);
  CHECK(sigma_schedule(c, 0) == c.sigma_initial());
  CHECK(sigma_schedule(c, 100) == c.sigma_final());
  CHECK(sigma_schedule(c, 50) == doctest::Approx((c.sigma_initial() + c.sigma_final()) / 2));
  CHECK(learning_rate(c, 0) == c.lr_initial);
  CHECK(learning_rate(c, 100) == c.lr_final);
  for (int t = 1; t < 101; ++t) CHECK(sigma_schedule(c, t) <= sigma_schedule(c, t - 1));
  CHECK_THROWS_AS(sigma_schedule(c, 101), Error);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    SomConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (Error const& e) {
      return e.kind() == ErrorKind::kInvalidArgument;
    }
    return false;
  };
  CHECK(bad([](SomConfig& c) { c.kS = 1.5; }));
  CHECK(bad([](SomConfig& c) { c.kS = 0; }));
  CHECK(bad([](SomConfig& c) { c.kR = -1; }));
  CHECK(bad([](SomConfig& c) { c.rows = 1; }));
  CHECK_FALSE(bad([](SomConfig& c) { c.kS = 1.0; }));
}

TEST_CASE("bmu matches the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto const grid = fixture::random_grid(6, 7, 11, seed);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<float> g;
    for (int i = 0; i < 200; ++i) {
      std::vector<float> x(11);
      for (auto& v : x) v = g(rng);
      auto const r = bmu(grid, x);
      CHECK(r.best == oracle::argmin_node(grid.weights(), 11, x));
      CHECK(r.second != r.best);
      CHECK(r.best_distance <= r.second_distance);
    }
  }
}

TEST_CASE("bmu ties go to the lowest index and distances are Euclidean") {
  auto const grid = fixture::grid_of(2, 2, 1, {3, 1, 1, 5});
  std::vector<float> x{1};
  auto const r = bmu(grid, x);
  CHECK(r.best == 1);
  CHECK(r.second == 2);
  std::vector<float> y{2.5f};
  auto const s = bmu(grid, y);
  CHECK(s.best == 0);
  CHECK(s.best_distance == doctest::Approx(0.5));
  CHECK(s.second_distance == doctest::Approx(1.5));
  std::vector<float> wrong{1, 2};
  CHECK_THROWS_AS(bmu(grid, wrong), Error);
}

TEST_CASE("smoothness hand instance") {
  auto const grid = fixture::grid_of(2, 2, 1, {0, 1, 2, 3});
  for (double s : local_smoothness(grid)) CHECK(s == doctest::Approx(1.5));
  CHECK(mean_smoothness(grid) == doctest::Approx(1.5));
  // 2-d weights: diagonal neighbours do not count
  auto const g2 = fixture::grid_of(1, 3, 2, {0, 0, 3, 4, 3, 4});
  auto const ls = local_smoothness(g2);
  CHECK(ls[0] == doctest::Approx(5));
  CHECK(ls[1] == doctest::Approx(2.5));
  CHECK(ls[2] == doctest::Approx(0));
}

TEST_CASE("metrics hand instance") {
  auto const grid = fixture::grid_of(2, 2, 1, {0, 1, 2, 3});
  // 0.9 -> bmu 1 (0.1), second 0 (adjacent). 1.6 -> bmu 2, second 1 (diagonal).
  auto const s = fixture::samples_of(1, {0.9f, 1.6f, 3.0f, 0.0f});
  auto const m = som_metrics(grid, s);
  CHECK(m.quantization_error == doctest::Approx((0.1 + 0.4 + 0 + 0) / 4).epsilon(1e-6));
  CHECK(m.topographic_error == doctest::Approx(0.25));
  double const mean = (0.9 + 1.6 + 3.0) / 4;
  double total = 0;
  for (double v : {0.9, 1.6, 3.0, 0.0}) total += (v - mean) * (v - mean);
  CHECK(m.explained_variance == doctest::Approx(1 - (0.01 + 0.16) / total).epsilon(1e-6));
  CHECK(m.mean_smoothness == doctest::Approx(1.5));
}

TEST_CASE("training is deterministic in the seed") {
  auto const s = small_samples(1);
  auto const a = train_som(s, config_of(4, 4, 500, 7));
  auto const b = train_som(s, config_of(4, 4, 500, 7));
  auto const c = train_som(s, config_of(4, 4, 500, 8));
  CHECK(a.weights() == b.weights());
  CHECK(a.weights() != c.weights());
  CHECK(a.config().iterations == 500);
}

TEST_CASE("iterations default to 20 per sample") {
  auto const s = small_samples(1);
  auto const g = train_som(s, config_of(3, 3, 0, 1));
  CHECK(g.config().iterations == static_cast<std::int64_t>(20 * s.rows));
}

TEST_CASE("training reduces quantization error") {
  auto const s = small_samples(2);
  std::vector<double> qe;
  auto const g = train_som(s, config_of(5, 5, 2000, 3), [&](TrainProgress const& p) {
    qe.push_back(p.quantization_error);
    CHECK(p.total == 2000);
    return true;
  });
  REQUIRE(qe.size() >= 2);
  CHECK(qe.back() < qe.front());
  CHECK(som_metrics(g, s).explained_variance > 0.8);
}

TEST_CASE("cancel raises kCancelled") {
  auto const s = small_samples(1);
  try {
    train_som(s, config_of(4, 4, 100000, 1), [](TrainProgress const&) { return false; });
    FAIL("expected cancellation");
  } catch (Error const& e) {
    CHECK(e.kind() == ErrorKind::kCancelled);
  }
}

TEST_CASE("checkpoint round-trip is exact") {
  auto const g = fixture::random_grid(3, 5, 4, 9);
  auto const bytes = encode_checkpoint(g);
  CHECK(bytes.substr(0, 8) == "CSOMCKP1");
  auto const back = decode_checkpoint(bytes);
  CHECK(back.weights() == g.weights());
  CHECK(back.config() == g.config());
  CHECK(back.dim() == 4);
  auto const dir = fixture::scratch_dir("ckpt");
  save_checkpoint(g, dir / "a.som");
  CHECK(load_checkpoint(dir / "a.som").weights() == g.weights());
  try {
    decode_checkpoint(bytes.substr(0, bytes.size() - 3));
    FAIL("expected a data error");
  } catch (Error const& e) {
    CHECK(e.kind() == ErrorKind::kDataError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("larger kR gives a smoother map and lower explained variance") {
  SyntheticRecipe r;
  r.years = 4;
  r.members = {{"G", "historical", "r1i1p1f1", {1, 0}}, {"G", "ssp585", "r1i1p1f1", {0, 1}}};
  auto const data = normalize_per_month(generate_synthetic_ensemble(r, 0));
  auto const s = flatten_samples(data, MonthFilter::all());
  double prev_ms = 1e9, prev_ev = 2;
  for (double kR : {0.03, 0.3}) {
    auto c = config_of(10, 10, 0, 3);
    c.kR = kR;
    auto const m = som_metrics(train_som(s, c), s);
    CHECK(m.mean_smoothness < prev_ms);
    CHECK(m.explained_variance < prev_ev);
    prev_ms = m.mean_smoothness;
    prev_ev = m.explained_variance;
  }
}

TEST_CASE("adjacency") {
  auto const g = fixture::random_grid(3, 3, 1, 0);
  CHECK(g.adjacent4(0, 1));
  CHECK(g.adjacent4(4, 7));
  CHECK_FALSE(g.adjacent4(2, 3));  // row wrap
  CHECK_FALSE(g.adjacent4(0, 4));
  CHECK_FALSE(g.adjacent4(0, 0));
}
