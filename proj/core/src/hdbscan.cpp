#include "climsom/hdbscan.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "climsom/error.hpp"

namespace climsom {

namespace {

struct MstEdge {
  std::size_t a;
  std::size_t b;
  double weight;
  double raw;
};

struct CondensedEdge {
  std::size_t parent;  // cluster label (>= n)
  std::size_t child;   // point (< n) or cluster label
  double lambda;
  std::size_t size;
};

}  // namespace

std::vector<int> hdbscan(std::span<double const> d, std::size_t n, HdbscanParams const& params) {
  if (params.min_cluster_size < 2) invalid("min_cluster_size must be >= 2");
  if (params.min_samples < 1) invalid("min_samples must be >= 1");
  if (d.size() != n * n) invalid("distance matrix must be n x n");
  if (n < static_cast<std::size_t>(params.min_cluster_size)) {
    invalid("fewer entities than min_cluster_size");
  }
  auto const mcs = static_cast<std::size_t>(params.min_cluster_size);

  // Core distance: distance to the min_samples-th nearest point, self included.
  std::vector<double> core(n);
  auto const k = std::min<std::size_t>(static_cast<std::size_t>(params.min_samples), n) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d.begin() + i * n, d.begin() + (i + 1) * n);
    std::nth_element(row.begin(), row.begin() + k, row.end());
    core[i] = row[k];
  }
  auto mrd = [&](std::size_t a, std::size_t b) {
    return std::max({core[a], core[b], d[a * n + b]});
  };

  // Prim on the dense mutual-reachability graph.
  std::vector<MstEdge> mst;
  if (n > 1) {
    std::vector<bool> in(n, false);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    in[0] = true;
    for (std::size_t v = 1; v < n; ++v) {
      best[v] = mrd(0, v);
      from[v] = 0;
    }
    for (std::size_t step = 1; step < n; ++step) {
      std::size_t pick = n;
      for (std::size_t v = 0; v < n; ++v) {
        if (!in[v] && (pick == n || best[v] < best[pick])) pick = v;
      }
      in[pick] = true;
      mst.push_back({std::min(from[pick], pick), std::max(from[pick], pick), best[pick],
                     d[from[pick] * n + pick]});
      for (std::size_t v = 0; v < n; ++v) {
        if (!in[v] && mrd(pick, v) < best[v]) {
          best[v] = mrd(pick, v);
          from[v] = pick;
        }
      }
    }
  }
  std::sort(mst.begin(), mst.end(), [](MstEdge const& x, MstEdge const& y) {
    return std::tie(x.weight, x.raw, x.a, x.b) < std::tie(y.weight, y.raw, y.a, y.b);
  });

  // Single-linkage dendrogram; node n + e is the merge from edge e.
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::size_t> left(n - 1), right(n - 1), size(2 * n - 1, 1);
  std::vector<double> height(n - 1);
  for (std::size_t e = 0; e < mst.size(); ++e) {
    auto const ra = find(mst[e].a);
    auto const rb = find(mst[e].b);
    auto const node = n + e;
    left[e] = ra;
    right[e] = rb;
    height[e] = mst[e].weight;
    size[node] = size[ra] + size[rb];
    parent[ra] = node;
    parent[rb] = node;
  }

  double max_height = 0.0;
  for (double h : height) max_height = std::max(max_height, h);
  double const min_height = max_height > 0 ? max_height * 1e-12 : 1e-300;
  auto lambda_of = [&](double h) { return 1.0 / std::max(h, min_height); };

  // Condense.
  std::vector<CondensedEdge> condensed;
  std::size_t next_label = n + 1;
  auto const root_label = n;
  auto leaves = [&](std::size_t node, auto&& emit) {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      auto const x = stack.back();
      stack.pop_back();
      if (x < n) {
        emit(x);
      } else {
        stack.push_back(right[x - n]);
        stack.push_back(left[x - n]);
      }
    }
  };
  if (n > 1) {
    std::vector<std::pair<std::size_t, std::size_t>> work{{2 * n - 2, root_label}};
    while (!work.empty()) {
      auto const [node, label] = work.back();
      work.pop_back();
      auto const e = node - n;
      double const lambda = lambda_of(height[e]);
      auto const l = left[e];
      auto const r = right[e];
      bool const big_l = size[l] >= mcs;
      bool const big_r = size[r] >= mcs;
      auto fall_out = [&](std::size_t sub) {
        leaves(sub, [&](std::size_t p) { condensed.push_back({label, p, lambda, 1}); });
      };
      if (big_l && big_r) {
        for (auto sub : {l, r}) {
          auto const child = next_label++;
          condensed.push_back({label, child, lambda, size[sub]});
          if (sub >= n) work.emplace_back(sub, child);
        }
      } else if (!big_l && !big_r) {
        fall_out(l);
        fall_out(r);
      } else {
        auto const keep = big_l ? l : r;
        fall_out(big_l ? r : l);
        if (keep >= n) {
          work.emplace_back(keep, label);
        } else {
          condensed.push_back({label, keep, lambda, 1});
        }
      }
    }
  } else {
    condensed.push_back({root_label, 0, 0.0, 1});
  }

  auto const labels_total = next_label;
  std::vector<double> birth(labels_total, 0.0);
  std::vector<std::vector<std::size_t>> children(labels_total);
  for (auto const& ce : condensed) {
    if (ce.child >= n) {
      birth[ce.child] = ce.lambda;
      children[ce.parent].push_back(ce.child);
    }
  }
  std::vector<double> stability(labels_total, 0.0);
  for (auto const& ce : condensed) {
    stability[ce.parent] += (ce.lambda - birth[ce.parent]) * static_cast<double>(ce.size);
  }

  // Excess of mass; children carry larger labels than parents.
  std::vector<bool> selected(labels_total, false);
  std::vector<double> subtree(labels_total, 0.0);
  for (std::size_t c = labels_total; c-- > root_label + 1;) {
    double child_sum = 0.0;
    for (auto ch : children[c]) child_sum += subtree[ch];
    if (children[c].empty() || stability[c] >= child_sum) {
      selected[c] = true;
      subtree[c] = stability[c];
    } else {
      subtree[c] = child_sum;
    }
  }
  // Keep only the topmost selected clusters.
  std::vector<int> owner(labels_total, -1);  // selected ancestor label
  std::vector<std::size_t> cluster_parent(labels_total, root_label);
  for (auto const& ce : condensed) {
    if (ce.child >= n) cluster_parent[ce.child] = ce.parent;
  }
  for (std::size_t c = root_label + 1; c < labels_total; ++c) {
    auto const up = cluster_parent[c];
    if (up != root_label && owner[up] >= 0) {
      owner[c] = owner[up];
    } else if (selected[c]) {
      owner[c] = static_cast<int>(c);
    }
  }

  std::vector<int> raw(n, -1);
  for (auto const& ce : condensed) {
    if (ce.child < n && ce.parent != root_label && owner[ce.parent] >= 0) {
      raw[ce.child] = owner[ce.parent];
    }
  }
  std::map<int, int> dense;
  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] < 0) continue;
    auto [it, inserted] = dense.try_emplace(raw[i], static_cast<int>(dense.size()));
    labels[i] = it->second;
  }
  return labels;
}

}  // namespace climsom
