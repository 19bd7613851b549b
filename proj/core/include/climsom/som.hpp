#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "climsom/ensemble.hpp"

namespace climsom {

struct SomConfig {
  int rows = 30;
  int cols = 30;
  // sigma_initial^2 / dim^2
  double kR = 0.03;
  // sigma_final / sigma_initial
  double kS = 0.2;
  // 0 means 20 x number of samples, resolved by train_som.
  std::int64_t iterations = 0;
  double lr_initial = 0.5;
  double lr_final = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
  // Lattice size used by the kR ratio: sqrt(rows * cols).
  double lattice_dim() const;
  double sigma_initial() const;
  double sigma_final() const;

  friend bool operator==(SomConfig const&, SomConfig const&) = default;
};

// Linear sigma decay, exact at both ends. Requires a resolved iteration count.
double sigma_schedule(SomConfig const& config, std::int64_t t);
double learning_rate(SomConfig const& config, std::int64_t t);

class SomGrid {
 public:
  SomGrid() = default;
  SomGrid(SomConfig config, std::size_t dim, std::vector<float> weights);

  SomConfig const& config() const { return config_; }
  int rows() const { return config_.rows; }
  int cols() const { return config_.cols; }
  std::size_t dim() const { return dim_; }
  std::size_t num_nodes() const { return static_cast<std::size_t>(rows()) * cols(); }
  std::span<float const> weight(std::size_t node) const {
    return {weights_.data() + node * dim_, dim_};
  }
  std::vector<float> const& weights() const { return weights_; }
  int row_of(std::size_t node) const { return static_cast<int>(node) / cols(); }
  int col_of(std::size_t node) const { return static_cast<int>(node) % cols(); }
  bool adjacent4(std::size_t a, std::size_t b) const;

 private:
  SomConfig config_;
  std::size_t dim_ = 0;
  std::vector<float> weights_;
};

struct BmuResult {
  std::size_t best = 0;
  std::size_t second = 0;  // equals best for single-node grids
  double best_distance = 0.0;
  double second_distance = 0.0;
};

// Euclidean argmin over nodes, ties to the lowest index.
BmuResult bmu(SomGrid const& grid, std::span<float const> x);

struct TrainProgress {
  std::int64_t iteration = 0;
  std::int64_t total = 0;
  double sigma = 0.0;
  double quantization_error = 0.0;  // on a fixed subsample
};

// Return false to cancel training (train_som then throws kCancelled).
using ProgressObserver = std::function<bool(TrainProgress const&)>;

SomGrid train_som(SampleMatrix const& samples, SomConfig config,
                  ProgressObserver const& progress = {});

struct SomMetrics {
  double quantization_error = 0.0;
  double topographic_error = 0.0;
  double explained_variance = 0.0;
  double mean_smoothness = 0.0;
};

std::vector<double> local_smoothness(SomGrid const& grid);
double mean_smoothness(SomGrid const& grid);
SomMetrics som_metrics(SomGrid const& grid, SampleMatrix const& samples);

// Checkpoint: "CSOMCKP1", u32 LE header length, JSON header, f32 LE weights.
std::string encode_checkpoint(SomGrid const& grid);
SomGrid decode_checkpoint(std::string const& bytes);
void save_checkpoint(SomGrid const& grid, std::filesystem::path const& path);
SomGrid load_checkpoint(std::filesystem::path const& path);

}  // namespace climsom
