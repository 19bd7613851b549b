#pragma once

#include <map>
#include <optional>
#include <stop_token>
#include <vector>

#include "climsom/geometry.hpp"
#include "climsom/som.hpp"

namespace climsom {

struct GraphEdge {
  int a = 0;
  int b = 0;
  double target = 0.0;
};

// 4-adjacency graph of a rows x cols lattice, node index = row * cols + col.
struct NodeGraph {
  int rows = 0;
  int cols = 0;
  std::vector<GraphEdge> edges;

  int num_nodes() const { return rows * cols; }
};

// Targets are weight-space distances rescaled so the median edge is 1.
NodeGraph build_node_graph(SomGrid const& grid);

// Lattice coordinates (x = col, y = row) centred and scaled to unit RMS radius.
std::vector<Vec2> lattice_layout(int rows, int cols);

struct MdeConfig {
  int max_iterations = 5000;
  double tolerance = 1e-6;
  double initial_step = 0.1;
};

enum class MdeStatus {
  kConverged,
  kMaxIterations,
  // No descent possible, e.g. every node anchored onto one point while
  // targets are nonzero.
  kStalled,
  kCancelled,
};

using AnchorMap = std::map<int, Vec2>;

struct Embedding {
  std::vector<Vec2> positions;
  AnchorMap anchors;
  NodeGraph graph;
  MdeConfig config;
  MdeStatus status = MdeStatus::kConverged;
  int iterations = 0;
  // Objective before the first step and after every accepted step.
  std::vector<double> objective_trace;
};

// Sum over edges of (|x_a - x_b| - target)^2.
double distortion(NodeGraph const& graph, std::span<Vec2 const> positions);

bool is_connected(NodeGraph const& graph);

// Gradient descent with backtracking; anchored nodes never move. Without
// anchors the result is translated so its centroid is the origin.
Embedding mde_project(NodeGraph graph, AnchorMap anchors,
                      std::optional<std::vector<Vec2>> init = std::nullopt,
                      MdeConfig config = {}, std::stop_token stop = {});

// Sets (or clears, with nullopt) one anchor and re-optimizes from the
// current positions.
Embedding update_anchor(Embedding const& embedding, int node, std::optional<Vec2> position,
                        std::stop_token stop = {});

char const* to_string(MdeStatus status);

}  // namespace climsom
