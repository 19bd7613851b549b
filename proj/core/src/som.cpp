#include "climsom/som.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <numeric>
#include <random>

#include "climsom/codec.hpp"
#include "climsom/error.hpp"

namespace climsom {

using nlohmann::json;

void SomConfig::validate() const {
  if (rows < 2 || cols < 2) invalid("SOM lattice must be at least 2x2");
  if (!(kR > 0.0)) invalid("kR must be positive");
  if (!(kS > 0.0 && kS <= 1.0)) invalid("kS must lie in (0, 1]");
  if (iterations < 0) invalid("iterations must be non-negative");
  if (!(lr_initial > 0.0) || !(lr_final > 0.0)) invalid("learning rates must be positive");
}

double SomConfig::lattice_dim() const {
  return std::sqrt(static_cast<double>(rows) * static_cast<double>(cols));
}

double SomConfig::sigma_initial() const { return lattice_dim() * std::sqrt(kR); }

double SomConfig::sigma_final() const { return kS * sigma_initial(); }

namespace {

double linear(double from, double to, std::int64_t t, std::int64_t n) {
  if (n <= 1 || t == 0) return from;
  if (t == n - 1) return to;
  return from + (to - from) * static_cast<double>(t) / static_cast<double>(n - 1);
}

}  // namespace

double sigma_schedule(SomConfig const& config, std::int64_t t) {
  if (config.iterations < 1) invalid("sigma schedule needs a resolved iteration count");
  if (t < 0 || t >= config.iterations) invalid("iteration out of range");
  return linear(config.sigma_initial(), config.sigma_final(), t, config.iterations);
}

double learning_rate(SomConfig const& config, std::int64_t t) {
  if (t < 0 || t >= config.iterations) invalid("iteration out of range");
  return linear(config.lr_initial, config.lr_final, t, config.iterations);
}

SomGrid::SomGrid(SomConfig config, std::size_t dim, std::vector<float> weights)
    : config_(config), dim_(dim), weights_(std::move(weights)) {
  if (config_.rows < 1 || config_.cols < 1) invalid("SOM lattice must be non-empty");
  if (weights_.size() != num_nodes() * dim_) invalid("weight block does not match lattice");
  if (!std::all_of(weights_.begin(), weights_.end(), [](float w) { return std::isfinite(w); })) {
    fail(ErrorKind::kDataError, "non-finite SOM weight");
  }
}

bool SomGrid::adjacent4(std::size_t a, std::size_t b) const {
  int const dr = std::abs(row_of(a) - row_of(b));
  int const dc = std::abs(col_of(a) - col_of(b));
  return dr + dc == 1;
}

namespace {

double squared_distance(std::span<float const> a, std::span<float const> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double const d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

// Squared distances to the best and second-best node of a node-major block.
BmuResult nearest_two(std::span<float const> weights, std::size_t dim,
                      std::span<float const> x) {
  BmuResult r;
  auto const nodes = weights.size() / dim;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nodes; ++k) {
    double const d = squared_distance(x, weights.subspan(k * dim, dim));
    if (d < best) {
      second = best;
      r.second = r.best;
      best = d;
      r.best = k;
    } else if (d < second) {
      second = d;
      r.second = k;
    }
  }
  if (nodes == 1) {
    second = best;
    r.second = r.best;
  }
  r.best_distance = best;
  r.second_distance = second;
  return r;
}

BmuResult bmu_squared(SomGrid const& grid, std::span<float const> x) {
  return nearest_two(grid.weights(), grid.dim(), x);
}

}  // namespace

BmuResult bmu(SomGrid const& grid, std::span<float const> x) {
  if (x.size() != grid.dim()) invalid("sample dimension does not match SOM");
  auto r = bmu_squared(grid, x);
  r.best_distance = std::sqrt(r.best_distance);
  r.second_distance = std::sqrt(r.second_distance);
  return r;
}

SomGrid train_som(SampleMatrix const& samples, SomConfig config,
                  ProgressObserver const& progress) {
  config.validate();
  if (samples.rows == 0 || samples.dim == 0) invalid("no samples to train on");
  if (samples.data.size() != samples.rows * samples.dim) {
    invalid("sample matrix dimension mismatch");
  }
  if (config.iterations == 0) {
    config.iterations = static_cast<std::int64_t>(20 * samples.rows);
  }

  auto const dim = samples.dim;
  auto const nodes = static_cast<std::size_t>(config.rows) * config.cols;
  std::vector<float> lo(dim, std::numeric_limits<float>::infinity());
  std::vector<float> hi(dim, -std::numeric_limits<float>::infinity());
  for (std::size_t i = 0; i < samples.rows; ++i) {
    auto const row = samples.row(i);
    for (std::size_t d = 0; d < dim; ++d) {
      lo[d] = std::min(lo[d], row[d]);
      hi[d] = std::max(hi[d], row[d]);
    }
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<float> weights(nodes * dim);
  for (std::size_t k = 0; k < nodes; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      weights[k * dim + d] = static_cast<float>(lo[d] + (hi[d] - lo[d]) * unit(rng));
    }
  }
  auto& w = weights;
  int const cols = config.cols;

  std::vector<std::size_t> probe;
  std::size_t const probe_size = std::min<std::size_t>(256, samples.rows);
  for (std::size_t i = 0; i < probe_size; ++i) {
    probe.push_back(i * samples.rows / probe_size);
  }
  auto probe_qe = [&] {
    double s = 0.0;
    for (auto i : probe) s += std::sqrt(nearest_two(w, dim, samples.row(i)).best_distance);
    return s / static_cast<double>(probe.size());
  };

  std::vector<std::size_t> order(samples.rows);
  std::iota(order.begin(), order.end(), 0);
  std::int64_t const report_every = std::max<std::int64_t>(1, config.iterations / 100);

  for (std::int64_t t = 0; t < config.iterations; ++t) {
    auto const pos = static_cast<std::size_t>(t) % samples.rows;
    if (pos == 0) {
      std::shuffle(order.begin(), order.end(), rng);
    }
    auto const x = samples.row(order[pos]);
    auto const winner = nearest_two(w, dim, x).best;
    double const sigma = sigma_schedule(config, t);
    double const lr = learning_rate(config, t);
    double const inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    auto const br = static_cast<int>(winner) / cols;
    auto const bc = static_cast<int>(winner) % cols;
    for (std::size_t k = 0; k < nodes; ++k) {
      double const dr = static_cast<int>(k) / cols - br;
      double const dc = static_cast<int>(k) % cols - bc;
      double const h = std::exp(-(dr * dr + dc * dc) * inv_two_sigma2);
      if (h < 1e-8) {
        continue;
      }
      auto const rate = static_cast<float>(lr * h);
      float* wk = w.data() + k * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        wk[d] += rate * (x[d] - wk[d]);
      }
    }
    if (progress && ((t + 1) % report_every == 0 || t + 1 == config.iterations)) {
      if (!progress({t + 1, config.iterations, sigma, probe_qe()})) {
        fail(ErrorKind::kCancelled, "training cancelled");
      }
    }
  }
  return SomGrid(config, dim, std::move(weights));
}

std::vector<double> local_smoothness(SomGrid const& grid) {
  std::vector<double> out(grid.num_nodes(), 0.0);
  int const rows = grid.rows();
  int const cols = grid.cols();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto const k = static_cast<std::size_t>(r * cols + c);
      double sum = 0.0;
      int count = 0;
      constexpr int kOffsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (auto const& o : kOffsets) {
        int const nr = r + o[0];
        int const nc = c + o[1];
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        auto const n = static_cast<std::size_t>(nr * cols + nc);
        sum += std::sqrt(squared_distance(grid.weight(k), grid.weight(n)));
        ++count;
      }
      out[k] = count > 0 ? sum / count : 0.0;
    }
  }
  return out;
}

double mean_smoothness(SomGrid const& grid) {
  auto const ls = local_smoothness(grid);
  return std::accumulate(ls.begin(), ls.end(), 0.0) / static_cast<double>(ls.size());
}

SomMetrics som_metrics(SomGrid const& grid, SampleMatrix const& samples) {
  if (samples.rows == 0) invalid("no samples for metrics");
  if (samples.dim != grid.dim()) invalid("sample dimension does not match SOM");

  std::vector<double> mean(samples.dim, 0.0);
  for (std::size_t i = 0; i < samples.rows; ++i) {
    auto const row = samples.row(i);
    for (std::size_t d = 0; d < samples.dim; ++d) mean[d] += row[d];
  }
  for (auto& m : mean) m /= static_cast<double>(samples.rows);

  double qe = 0.0;
  double residual = 0.0;
  double total = 0.0;
  std::size_t topo_errors = 0;
  for (std::size_t i = 0; i < samples.rows; ++i) {
    auto const row = samples.row(i);
    auto const b = bmu_squared(grid, row);
    qe += std::sqrt(b.best_distance);
    residual += b.best_distance;
    for (std::size_t d = 0; d < samples.dim; ++d) {
      double const dev = row[d] - mean[d];
      total += dev * dev;
    }
    if (grid.num_nodes() > 1 && !grid.adjacent4(b.best, b.second)) {
      ++topo_errors;
    }
  }
  if (!(total > 0.0)) {
    invalid("samples have zero variance; explained variance is undefined");
  }
  auto const n = static_cast<double>(samples.rows);
  return {qe / n, static_cast<double>(topo_errors) / n, 1.0 - residual / total,
          mean_smoothness(grid)};
}

std::string encode_checkpoint(SomGrid const& grid) {
  auto const& c = grid.config();
  json header = {{"rows", grid.rows()},
                 {"cols", grid.cols()},
                 {"dim", grid.dim()},
                 {"config",
                  {{"kR", c.kR},
                   {"kS", c.kS},
                   {"iterations", c.iterations},
                   {"lr_initial", c.lr_initial},
                   {"lr_final", c.lr_final},
                   {"seed", c.seed}}}};
  auto const text = header.dump();
  std::string out = "CSOMCKP1";
  auto const len = static_cast<std::uint32_t>(text.size());
  for (int b = 0; b < 4; ++b) out += static_cast<char>((len >> (8 * b)) & 0xFF);
  out += text;
  codec::append_f32le(out, grid.weights());
  return out;
}

SomGrid decode_checkpoint(std::string const& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 8, "CSOMCKP1") != 0) {
    fail(ErrorKind::kDataError, "not a SOM checkpoint");
  }
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) {
    len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
  }
  if (bytes.size() < 12 + static_cast<std::size_t>(len)) {
    fail(ErrorKind::kDataError, "truncated SOM checkpoint header");
  }
  try {
    auto const header = json::parse(bytes.substr(12, len));
    SomConfig config;
    config.rows = header.at("rows").get<int>();
    config.cols = header.at("cols").get<int>();
    auto const& c = header.at("config");
    config.kR = c.at("kR").get<double>();
    config.kS = c.at("kS").get<double>();
    config.iterations = c.at("iterations").get<std::int64_t>();
    config.lr_initial = c.at("lr_initial").get<double>();
    config.lr_final = c.at("lr_final").get<double>();
    config.seed = c.at("seed").get<std::uint64_t>();
    auto const dim = header.at("dim").get<std::size_t>();
    auto weights = codec::parse_f32le(std::string_view(bytes).substr(12 + len));
    if (weights.size() != static_cast<std::size_t>(config.rows) * config.cols * dim) {
      fail(ErrorKind::kDataError, "SOM checkpoint weight block has the wrong size");
    }
    return SomGrid(config, dim, std::move(weights));
  } catch (json::exception const& e) {
    fail(ErrorKind::kDataError, std::string("corrupt SOM checkpoint header: ") + e.what());
  }
}

void save_checkpoint(SomGrid const& grid, std::filesystem::path const& path) {
  codec::write_file(path, encode_checkpoint(grid));
}

SomGrid load_checkpoint(std::filesystem::path const& path) {
  return decode_checkpoint(codec::read_file(path));
}

}  // namespace climsom
