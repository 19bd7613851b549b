#include "climsom/embed.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "climsom/error.hpp"

namespace climsom {

NodeGraph build_node_graph(SomGrid const& grid) {
  NodeGraph graph{grid.rows(), grid.cols(), {}};
  auto dist = [&](int a, int b) {
    auto const wa = grid.weight(a);
    auto const wb = grid.weight(b);
    double s = 0.0;
    for (std::size_t d = 0; d < wa.size(); ++d) {
      double const diff = static_cast<double>(wa[d]) - wb[d];
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  for (int r = 0; r < graph.rows; ++r) {
    for (int c = 0; c < graph.cols; ++c) {
      int const k = r * graph.cols + c;
      if (c + 1 < graph.cols) graph.edges.push_back({k, k + 1, dist(k, k + 1)});
      if (r + 1 < graph.rows) graph.edges.push_back({k, k + graph.cols, dist(k, k + graph.cols)});
    }
  }
  if (graph.edges.empty()) {
    return graph;
  }
  std::vector<double> targets;
  for (auto const& e : graph.edges) targets.push_back(e.target);
  std::sort(targets.begin(), targets.end());
  auto const n = targets.size();
  double const median = n % 2 == 1 ? targets[n / 2] : 0.5 * (targets[n / 2 - 1] + targets[n / 2]);
  if (median > 0.0) {
    for (auto& e : graph.edges) e.target /= median;
  }
  return graph;
}

std::vector<Vec2> lattice_layout(int rows, int cols) {
  std::vector<Vec2> pos;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) pos.push_back({static_cast<double>(c), static_cast<double>(r)});
  }
  Vec2 centre{(cols - 1) / 2.0, (rows - 1) / 2.0};
  double sq = 0.0;
  for (auto& p : pos) {
    p = p - centre;
    sq += dot(p, p);
  }
  double const rms = pos.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(pos.size()));
  if (rms > 0.0) {
    for (auto& p : pos) p = (1.0 / rms) * p;
  }
  return pos;
}

double distortion(NodeGraph const& graph, std::span<Vec2 const> positions) {
  double f = 0.0;
  for (auto const& e : graph.edges) {
    double const r = distance(positions[e.a], positions[e.b]) - e.target;
    f += r * r;
  }
  return f;
}

bool is_connected(NodeGraph const& graph) {
  int const n = graph.num_nodes();
  if (n <= 1) return true;
  std::vector<std::vector<int>> adj(n);
  for (auto const& e : graph.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    int const u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

namespace {

void gradient(NodeGraph const& graph, std::span<Vec2 const> x, std::vector<Vec2>& g) {
  std::fill(g.begin(), g.end(), Vec2{});
  for (auto const& e : graph.edges) {
    Vec2 const r = x[e.a] - x[e.b];
    double const len = norm(r);
    if (len == 0.0) continue;
    double const s = 2.0 * (len - e.target) / len;
    g[e.a] = g[e.a] + s * r;
    g[e.b] = g[e.b] - s * r;
  }
}

}  // namespace

Embedding mde_project(NodeGraph graph, AnchorMap anchors, std::optional<std::vector<Vec2>> init,
                      MdeConfig config, std::stop_token stop) {
  int const n = graph.num_nodes();
  for (auto const& e : graph.edges) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n || !(e.target >= 0.0)) {
      invalid("malformed node graph edge");
    }
  }
  if (!is_connected(graph)) {
    invalid("node graph is disconnected");
  }
  for (auto const& [node, p] : anchors) {
    if (node < 0 || node >= n) invalid("anchor node out of range");
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) invalid("anchor position must be finite");
  }

  Embedding out;
  out.positions = init ? std::move(*init) : lattice_layout(graph.rows, graph.cols);
  if (static_cast<int>(out.positions.size()) != n) {
    invalid("initial layout size does not match the graph");
  }
  for (auto const& [node, p] : anchors) out.positions[node] = p;
  out.anchors = std::move(anchors);
  out.graph = std::move(graph);
  out.config = config;

  std::vector<bool> fixed(n, false);
  for (auto const& [node, p] : out.anchors) fixed[node] = true;
  bool const all_fixed = static_cast<int>(out.anchors.size()) == n;

  auto& x = out.positions;
  double f = distortion(out.graph, x);
  out.objective_trace.push_back(f);

  if (all_fixed) {
    bool const coincident =
        std::all_of(x.begin(), x.end(), [&](Vec2 p) { return p == x.front(); });
    out.status = coincident && f > 0.0 ? MdeStatus::kStalled : MdeStatus::kConverged;
    return out;
  }

  std::vector<Vec2> g(n), trial(n);
  double step = config.initial_step;
  out.status = MdeStatus::kMaxIterations;
  for (int it = 0; it < config.max_iterations; ++it) {
    if (stop.stop_requested()) {
      out.status = MdeStatus::kCancelled;
      break;
    }
    if (f == 0.0) {
      out.status = MdeStatus::kConverged;
      break;
    }
    gradient(out.graph, x, g);
    double gg = 0.0;
    for (int k = 0; k < n; ++k) {
      if (fixed[k]) g[k] = Vec2{};
      gg += dot(g[k], g[k]);
    }
    if (gg == 0.0) {
      out.status = MdeStatus::kConverged;
      break;
    }
    step *= 2.0;
    double f_trial = f;
    bool accepted = false;
    while (step > 1e-18) {
      for (int k = 0; k < n; ++k) trial[k] = x[k] - step * g[k];
      f_trial = distortion(out.graph, trial);
      if (f_trial <= f - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.status = MdeStatus::kStalled;
      break;
    }
    x.swap(trial);
    double const decrease = f - f_trial;
    double const previous = f;
    f = f_trial;
    out.objective_trace.push_back(f);
    out.iterations = it + 1;
    if (decrease <= config.tolerance * previous) {
      out.status = MdeStatus::kConverged;
      break;
    }
  }

  if (out.anchors.empty()) {
    Vec2 c{};
    for (auto const& p : x) c = c + p;
    c = (1.0 / n) * c;
    for (auto& p : x) p = p - c;
  }
  return out;
}

Embedding update_anchor(Embedding const& embedding, int node, std::optional<Vec2> position,
                        std::stop_token stop) {
  if (node < 0 || node >= embedding.graph.num_nodes()) {
    fail(ErrorKind::kNotFound, "node index out of range");
  }
  auto anchors = embedding.anchors;
  if (position) {
    anchors[node] = *position;
  } else {
    anchors.erase(node);
  }
  return mde_project(embedding.graph, std::move(anchors), embedding.positions, embedding.config,
                     stop);
}

char const* to_string(MdeStatus status) {
  switch (status) {
    case MdeStatus::kConverged:
      return "converged";
    case MdeStatus::kMaxIterations:
      return "max_iterations";
    case MdeStatus::kStalled:
      return "stalled";
    case MdeStatus::kCancelled:
      return "cancelled";
  }
  return "unknown";
}

}  // namespace climsom
