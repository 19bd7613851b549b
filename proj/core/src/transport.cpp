#include "climsom/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "climsom/error.hpp"

namespace climsom {

std::int64_t WeightedPoints::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

WeightedPoints aggregate_points(std::span<Vec2 const> points) {
  WeightedPoints out;
  std::map<Vec2, std::size_t> slot;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(points[i], out.points.size());
    if (inserted) {
      out.points.push_back(points[i]);
      out.counts.push_back(0);
      out.members.emplace_back();
    }
    out.counts[it->second] += 1;
    out.members[it->second].push_back(i);
  }
  return out;
}

namespace {

struct AssignmentResult {
  std::vector<std::size_t> assignment;
  std::vector<double> u;  // row potentials, 1-based
  std::vector<double> v;  // column potentials, 1-based
};

AssignmentResult hungarian(std::span<double const> cost, std::size_t n) {
  // Shortest augmenting path with row/column potentials, 1-based internally.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      std::size_t const i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double const cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t const j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return {std::move(assignment), std::move(u), std::move(v)};
}

}  // namespace

std::vector<std::size_t> solve_assignment(std::span<double const> cost, std::size_t n) {
  if (cost.size() != n * n) invalid("assignment cost matrix must be square");
  return hungarian(cost, n).assignment;
}

namespace {

// Primal network simplex on the complete bipartite graph with block-search
// pivoting and an artificial root, following the spanning-tree bookkeeping
// (parent/thread/succ_num/last_succ) of the LEMON implementation. Arcs are
// uncapacitated and flows integral.
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<double const> cost, std::span<std::int64_t const> supply,
                 std::span<std::int64_t const> demand)
      : m_(static_cast<Node>(supply.size())),
        n_(static_cast<Node>(demand.size())),
        node_num_(m_ + n_),
        arc_num_(static_cast<Arc>(m_) * n_) {
    Arc const all_arcs = arc_num_ + node_num_;
    Node const all_nodes = node_num_ + 1;
    cost_.assign(all_arcs, 0.0);
    std::copy(cost.begin(), cost.end(), cost_.begin());
    flow_.assign(all_arcs, 0);
    source_.resize(all_arcs);
    target_.resize(all_arcs);
    state_.assign(all_arcs, kLower);
    supply_.resize(all_nodes);
    pi_.assign(all_nodes, 0.0);
    parent_.resize(all_nodes);
    pred_.resize(all_nodes);
    thread_.resize(all_nodes);
    rev_thread_.resize(all_nodes);
    succ_num_.resize(all_nodes);
    last_succ_.resize(all_nodes);
    forward_.resize(all_nodes);
    for (Node i = 0; i < m_; ++i) supply_[i] = supply[i];
    for (Node j = 0; j < n_; ++j) supply_[m_ + j] = -demand[j];
    for (Arc a = 0; a < arc_num_; ++a) {
      source_[a] = static_cast<Node>(a / n_);
      target_[a] = static_cast<Node>(a % n_) + m_;
    }
  }

  std::vector<UnitFlow> run() {
    init_tree();
    initial_pivots();
    while (find_entering_arc()) {
      pivot();
    }
    for (Arc e = arc_num_; e < arc_num_ + node_num_; ++e) {
      if (flow_[e] != 0) {
        fail(ErrorKind::kDataError, "transportation problem is infeasible");
      }
    }
    std::vector<UnitFlow> out;
    for (Arc a = 0; a < arc_num_; ++a) {
      if (flow_[a] > 0) {
        out.push_back({static_cast<std::size_t>(a / n_), static_cast<std::size_t>(a % n_),
                       flow_[a]});
      }
    }
    return out;
  }

  // Reduced cost of every real arc under the final potentials; zero on the
  // face of optimal plans.
  std::vector<double> reduced_costs() const {
    std::vector<double> out(static_cast<std::size_t>(arc_num_));
    for (Arc a = 0; a < arc_num_; ++a) out[a] = cost_[a] + pi_[source_[a]] - pi_[target_[a]];
    return out;
  }

 private:
  using Node = std::int64_t;
  using Arc = std::int64_t;
  static constexpr signed char kUpper = -1;
  static constexpr signed char kTree = 0;
  static constexpr signed char kLower = 1;
  static constexpr std::int64_t kInfFlow = std::numeric_limits<std::int64_t>::max();

  void init_tree() {
    double const max_cost =
        arc_num_ > 0 ? *std::max_element(cost_.begin(), cost_.begin() + arc_num_) : 0.0;
    double const art_cost = (max_cost + 1.0) * static_cast<double>(node_num_);
    Node const root = node_num_;
    parent_[root] = -1;
    pred_[root] = -1;
    thread_[root] = 0;
    rev_thread_[0] = root;
    succ_num_[root] = node_num_ + 1;
    last_succ_[root] = root - 1;
    supply_[root] = 0;
    pi_[root] = 0.0;
    Arc e = arc_num_;
    for (Node u = 0; u < node_num_; ++u, ++e) {
      parent_[u] = root;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kTree;
      if (supply_[u] >= 0) {
        forward_[u] = true;
        pi_[u] = 0.0;
        source_[e] = u;
        target_[e] = root;
        flow_[e] = supply_[u];
        cost_[e] = 0.0;
      } else {
        forward_[u] = false;
        pi_[u] = art_cost;
        source_[e] = root;
        target_[e] = u;
        flow_[e] = -supply_[u];
        cost_[e] = art_cost;
      }
    }
    next_arc_ = 0;
    block_size_ = std::max<Arc>(static_cast<Arc>(std::sqrt(static_cast<double>(arc_num_))), 10);
  }

  double reduced(Arc e) const {
    return state_[e] * (cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
  }

  bool significant(double c) const {
    double a = std::max(std::fabs(pi_[source_[in_arc_]]), std::fabs(pi_[target_[in_arc_]]));
    a = std::max(a, std::fabs(cost_[in_arc_]));
    return c < -kEpsilon * a;
  }

  bool find_entering_arc() {
    double min = 0.0;
    Arc e = next_arc_;
    Arc cnt = block_size_;
    for (Arc ind = 0; ind < arc_num_; ++ind, ++e) {
      if (e == arc_num_) e = 0;
      double const c = reduced(e);
      if (c < min) {
        min = c;
        in_arc_ = e;
      }
      if (--cnt == 0) {
        if (min < 0.0 && significant(min)) {
          next_arc_ = e;
          return true;
        }
        cnt = block_size_;
      }
    }
    if (min < 0.0 && significant(min)) {
      next_arc_ = e;
      return true;
    }
    return false;
  }

  void initial_pivots() {
    for (Node v = m_; v < node_num_; ++v) {
      double best = std::numeric_limits<double>::max();
      Arc best_arc = -1;
      for (Arc a = v - m_; a < arc_num_; a += n_) {
        if (cost_[a] < best) {
          best = cost_[a];
          best_arc = a;
        }
      }
      if (best_arc < 0) continue;
      in_arc_ = best_arc;
      if (reduced(in_arc_) >= 0.0) continue;
      pivot();
    }
  }

  void pivot() {
    find_join_node();
    bool const change = find_leaving_arc();
    if (delta_ >= kInfFlow) {
      fail(ErrorKind::kDataError, "transportation problem is unbounded");
    }
    change_flow(change);
    if (change) {
      update_tree_structure();
      update_potential();
    }
  }

  void find_join_node() {
    Node u = source_[in_arc_];
    Node v = target_[in_arc_];
    while (u != v) {
      if (succ_num_[u] < succ_num_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    if (state_[in_arc_] == kLower) {
      first_ = source_[in_arc_];
      second_ = target_[in_arc_];
    } else {
      first_ = target_[in_arc_];
      second_ = source_[in_arc_];
    }
    delta_ = kInfFlow;
    int result = 0;
    for (Node u = first_; u != join_; u = parent_[u]) {
      std::int64_t const d = forward_[u] ? flow_[pred_[u]] : kInfFlow;
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (Node u = second_; u != join_; u = parent_[u]) {
      std::int64_t const d = forward_[u] ? kInfFlow : flow_[pred_[u]];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first_;
      v_in_ = second_;
    } else {
      u_in_ = second_;
      v_in_ = first_;
    }
    return result != 0;
  }

  void change_flow(bool change) {
    if (delta_ > 0) {
      std::int64_t const val = state_[in_arc_] * delta_;
      flow_[in_arc_] += val;
      for (Node u = source_[in_arc_]; u != join_; u = parent_[u]) {
        flow_[pred_[u]] += forward_[u] ? -val : val;
      }
      for (Node u = target_[in_arc_]; u != join_; u = parent_[u]) {
        flow_[pred_[u]] += forward_[u] ? val : -val;
      }
    }
    if (change) {
      state_[in_arc_] = kTree;
      state_[pred_[u_out_]] = flow_[pred_[u_out_]] == 0 ? kLower : kUpper;
    } else {
      state_[in_arc_] = static_cast<signed char>(-state_[in_arc_]);
    }
  }

  void update_tree_structure() {
    Node u = last_succ_[u_in_];
    Node const old_rev_thread = rev_thread_[u_out_];
    Node const old_succ_num = succ_num_[u_out_];
    Node const old_last_succ = last_succ_[u_out_];
    Node const v_out = parent_[u_out_];
    Node right = thread_[u];
    Node last = 0;

    if (old_rev_thread == v_in_) {
      last = thread_[last_succ_[u_out_]];
    } else {
      last = thread_[v_in_];
    }

    Node stem = u_in_;
    thread_[v_in_] = stem;
    dirty_revs_.clear();
    dirty_revs_.push_back(v_in_);
    Node par_stem = v_in_;
    while (stem != u_out_) {
      Node const new_stem = parent_[stem];
      thread_[u] = new_stem;
      dirty_revs_.push_back(u);

      Node const w = rev_thread_[stem];
      thread_[w] = right;
      rev_thread_[right] = w;

      parent_[stem] = par_stem;
      par_stem = stem;
      stem = new_stem;

      u = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
      right = thread_[u];
    }
    parent_[u_out_] = par_stem;
    thread_[u] = last;
    rev_thread_[last] = u;
    last_succ_[u_out_] = u;

    if (old_rev_thread != v_in_) {
      thread_[old_rev_thread] = right;
      rev_thread_[right] = old_rev_thread;
    }
    for (Node d : dirty_revs_) {
      rev_thread_[thread_[d]] = d;
    }

    Node tmp_sc = 0;
    Node const tmp_ls = last_succ_[u_out_];
    u = u_out_;
    while (u != u_in_) {
      Node const w = parent_[u];
      pred_[u] = pred_[w];
      forward_[u] = !forward_[w];
      tmp_sc += succ_num_[u] - succ_num_[w];
      succ_num_[u] = tmp_sc;
      last_succ_[w] = tmp_ls;
      u = w;
    }
    pred_[u_in_] = in_arc_;
    forward_[u_in_] = u_in_ == source_[in_arc_];
    succ_num_[u_in_] = old_succ_num;

    Node up_limit_in = -1;
    Node up_limit_out = -1;
    if (last_succ_[join_] == v_in_) {
      up_limit_out = join_;
    } else {
      up_limit_in = join_;
    }
    for (u = v_in_; u != up_limit_in && last_succ_[u] == v_in_; u = parent_[u]) {
      last_succ_[u] = last_succ_[u_out_];
    }
    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (u = v_out; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = old_rev_thread;
      }
    } else {
      for (u = v_out; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = last_succ_[u_out_];
      }
    }
    for (u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (u = v_out; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    double const sigma = forward_[u_in_]
                             ? pi_[v_in_] - pi_[u_in_] - cost_[pred_[u_in_]]
                             : pi_[v_in_] - pi_[u_in_] + cost_[pred_[u_in_]];
    Node const end = thread_[last_succ_[u_in_]];
    for (Node u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  static constexpr double kEpsilon = 64 * std::numeric_limits<double>::epsilon();

  Node m_, n_, node_num_;
  Arc arc_num_;
  std::vector<double> cost_;
  std::vector<std::int64_t> flow_;
  std::vector<Node> source_, target_;
  std::vector<signed char> state_;
  std::vector<std::int64_t> supply_;
  std::vector<double> pi_;
  std::vector<Node> parent_, thread_, rev_thread_, succ_num_, last_succ_, dirty_revs_;
  std::vector<Arc> pred_;
  std::vector<char> forward_;

  Arc next_arc_ = 0;
  Arc block_size_ = 10;
  Arc in_arc_ = 0;
  Node join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, first_ = 0, second_ = 0;
  std::int64_t delta_ = 0;
};

std::vector<double> cost_matrix(std::span<Vec2 const> a, std::span<Vec2 const> b) {
  std::vector<double> c(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) c[i * b.size() + j] = distance(a[i], b[j]);
  }
  return c;
}

// Squared lengths on the optimal face of the Euclidean problem; off-face
// arcs carry a penalty that no cycle (at most 2 * min(m, n) arcs) can
// recover, so the optimum stays on the face.
std::vector<double> tie_break_costs(std::span<double const> cost, std::span<double const> reduced,
                                    std::size_t m, std::size_t n) {
  double const max_cost = *std::max_element(cost.begin(), cost.end());
  double const tol = 1e-11 * (1.0 + max_cost);
  double const penalty =
      2.0 * static_cast<double>(std::min(m, n)) * max_cost * max_cost + 1.0;
  std::vector<double> out(cost.size());
  for (std::size_t i = 0; i < cost.size(); ++i) {
    out[i] = cost[i] * cost[i] + (reduced[i] > tol ? penalty : 0.0);
  }
  return out;
}

}  // namespace

std::vector<UnitFlow> solve_transportation(std::span<double const> cost,
                                           std::span<std::int64_t const> supply,
                                           std::span<std::int64_t const> demand) {
  if (supply.empty() || demand.empty()) invalid("transportation problem needs both sides");
  if (cost.size() != supply.size() * demand.size()) invalid("cost matrix shape mismatch");
  auto const s = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
  auto const d = std::accumulate(demand.begin(), demand.end(), std::int64_t{0});
  if (s != d) invalid("supply and demand totals differ");
  if (std::any_of(supply.begin(), supply.end(), [](auto v) { return v < 0; }) ||
      std::any_of(demand.begin(), demand.end(), [](auto v) { return v < 0; })) {
    invalid("negative supply or demand");
  }
  return NetworkSimplex(cost, supply, demand).run();
}

std::vector<UnitFlow> transport_weighted(WeightedPoints const& a, WeightedPoints const& b) {
  auto const na = a.total();
  auto const nb = b.total();
  if (na == 0 || nb == 0) invalid("optimal transport needs non-empty point sets");
  std::vector<std::int64_t> supply(a.counts.size()), demand(b.counts.size());
  for (std::size_t i = 0; i < supply.size(); ++i) supply[i] = a.counts[i] * nb;
  for (std::size_t j = 0; j < demand.size(); ++j) demand[j] = b.counts[j] * na;
  auto const cost = cost_matrix(a.points, b.points);
  NetworkSimplex first(cost, supply, demand);
  first.run();
  auto const refined = tie_break_costs(cost, first.reduced_costs(), supply.size(), demand.size());
  return NetworkSimplex(refined, supply, demand).run();
}

TransportPlan optimal_transport(std::span<Vec2 const> a, std::span<Vec2 const> b) {
  if (a.empty() || b.empty()) invalid("optimal transport needs non-empty point sets");
  TransportPlan plan;
  auto const wa = aggregate_points(a);
  auto const wb = aggregate_points(b);

  if (a.size() == b.size() && wa.points.size() == a.size() && wb.points.size() == b.size()) {
    auto const n = a.size();
    auto const cost = cost_matrix(a, b);
    auto const first = hungarian(cost, n);
    std::vector<double> reduced(cost.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        reduced[i * n + j] = cost[i * n + j] - first.u[i + 1] - first.v[j + 1];
      }
    }
    auto const assignment = hungarian(tie_break_costs(cost, reduced, n, n), n).assignment;
    double const mass = 1.0 / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      plan.pairs.push_back({i, assignment[i], mass});
      plan.cost += mass * cost[i * b.size() + assignment[i]];
    }
    return plan;
  }

  auto const flows = transport_weighted(wa, wb);
  // Split each location-level flow across the coincident points it covers.
  auto const units_a = static_cast<std::int64_t>(b.size());
  auto const units_b = static_cast<std::int64_t>(a.size());
  double const unit_mass = 1.0 / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  std::vector<std::size_t> cursor_a(wa.points.size(), 0), cursor_b(wb.points.size(), 0);
  std::vector<std::int64_t> left_a(wa.points.size(), units_a), left_b(wb.points.size(), units_b);
  for (auto const& f : flows) {
    std::int64_t remaining = f.units;
    while (remaining > 0) {
      auto& ca = cursor_a[f.source];
      auto& cb = cursor_b[f.target];
      std::int64_t const take = std::min({remaining, left_a[f.source], left_b[f.target]});
      std::size_t const i = wa.members[f.source][ca];
      std::size_t const j = wb.members[f.target][cb];
      plan.pairs.push_back({i, j, static_cast<double>(take) * unit_mass});
      remaining -= take;
      left_a[f.source] -= take;
      left_b[f.target] -= take;
      if (left_a[f.source] == 0) {
        ++ca;
        left_a[f.source] = units_a;
      }
      if (left_b[f.target] == 0) {
        ++cb;
        left_b[f.target] = units_b;
      }
    }
    plan.cost += static_cast<double>(f.units) * unit_mass *
                 distance(wa.points[f.source], wb.points[f.target]);
  }
  std::sort(plan.pairs.begin(), plan.pairs.end(), [](auto const& x, auto const& y) {
    return std::tie(x.source, x.target) < std::tie(y.source, y.target);
  });
  return plan;
}

}  // namespace climsom
