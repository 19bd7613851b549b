#pragma once

#include <span>
#include <string>
#include <vector>

#include "climsom/compare.hpp"
#include "climsom/distribution.hpp"
#include "climsom/ensemble.hpp"
#include "climsom/hdbscan.hpp"
#include "climsom/som.hpp"

namespace climsom {

struct DistanceMatrix {
  std::vector<std::string> labels;
  std::vector<double> d;  // row-major, size() x size()

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return d[i * size() + j]; }
};

// Pairwise optimal-transport cost with uniform weights.
DistanceMatrix emd_matrix(std::vector<std::string> labels,
                          std::span<std::vector<Vec2> const> distributions, unsigned threads = 0);

struct ClusterAssignment {
  std::vector<std::string> labels;
  std::vector<int> cluster;  // -1 = noise
  int num_clusters = 0;
  std::vector<Vec2> embedding;  // 2D classical MDS coordinates
};

ClusterAssignment embed_cluster(DistanceMatrix const& distances, HdbscanParams const& params = {});

// Positions of a 1D classical MDS, centred at 0.
std::vector<double> mds_1d(DistanceMatrix const& distances);

struct TimelineCluster {
  int id = 0;
  double position = 0.0;
  double mean_anomaly = 0.0;
  bool noise = false;  // singleton pseudo-cluster for a noise entity
  std::vector<std::size_t> entities;
};

struct TimelineMonth {
  int month = 0;
  std::vector<TimelineCluster> clusters;
  std::vector<int> entity_cluster;  // cluster id per entity
};

struct MonthlyClusterTimeline {
  std::vector<std::string> entities;
  std::vector<TimelineMonth> months;

  // Cluster id of every entity in every month, [entity][month index].
  std::vector<std::vector<int>> lines() const;
};

// Each member key is one entity; every year of a month is pooled.
MonthlyClusterTimeline monthly_timeline(EnsembleDataset const& dataset,
                                        std::vector<std::string> const& members,
                                        MonthFilter const& months, SomGrid const& grid,
                                        std::span<Vec2 const> positions,
                                        HdbscanParams const& params = {});

// Bootstrap field from a GCM's historical members to its members under `ssp`.
VectorField forcing_field(EnsembleDataset const& dataset, std::string const& gcm,
                          std::string const& ssp, MonthFilter const& months,
                          std::vector<std::vector<int>> const& bmus,
                          std::span<Vec2 const> positions, FieldParams params);

VectorField forcing_field(EnsembleDataset const& dataset, std::string const& gcm,
                          std::string const& ssp, MonthFilter const& months, SomGrid const& grid,
                          std::span<Vec2 const> positions, FieldParams params);

// 1 - mean cosine over cells supported in both fields.
double field_distance(VectorField const& a, VectorField const& b);

// Per-cell mean over the fields that support each cell.
VectorField mean_field(std::span<VectorField const> fields);

MonthlyClusterTimeline forcing_timeline(EnsembleDataset const& dataset,
                                        std::vector<std::string> const& gcms,
                                        std::string const& ssp, MonthFilter const& months,
                                        SomGrid const& grid, std::span<Vec2 const> positions,
                                        FieldParams const& field = {},
                                        HdbscanParams const& params = {});

// GCMs that have both historical members and members under `ssp`.
std::vector<std::string> gcms_with_ssp(EnsembleDataset const& dataset, std::string const& ssp);

}  // namespace climsom
