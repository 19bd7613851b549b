#pragma once

// Brute-force reference implementations. They are deliberately naive and
// share no code with the engine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "climsom/geometry.hpp"

namespace climsom::oracle {

// Exhaustive nearest node; ties keep the lowest index.
inline std::size_t argmin_node(std::span<float const> weights, std::size_t dim,
                               std::span<float const> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k * dim < weights.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      acc += std::pow(double(weights[k * dim + i]) - double(x[i]), 2);
    }
    double const d = std::sqrt(acc);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

// Minimum of sum |a_i - b_perm(i)| / n over all n! permutations.
inline double brute_force_assignment(std::span<Vec2 const> a, std::span<Vec2 const> b) {
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      c += std::hypot(a[i].x - b[perm[i]].x, a[i].y - b[perm[i]].y);
    }
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

// Uniform-weight transport between |a| = m and |b| = n points equals the
// assignment problem after copying every a point n times and every b point
// m times. Only usable for tiny m * n.
inline double brute_force_transport(std::span<Vec2 const> a, std::span<Vec2 const> b) {
  std::vector<Vec2> ea, eb;
  for (auto p : a) ea.insert(ea.end(), b.size(), p);
  for (auto p : b) eb.insert(eb.end(), a.size(), p);
  return brute_force_assignment(ea, eb);
}

// Ray casting with an explicit edge check (boundary counts as inside).
inline bool inside_ring(Vec2 p, std::span<Vec2 const> ring) {
  std::size_t n = ring.size();
  if (n > 1 && ring.front() == ring.back()) --n;
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    Vec2 const a = ring[i], b = ring[j];
    double const cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cr) < 1e-12 && p.x >= std::min(a.x, b.x) - 1e-12 &&
        p.x <= std::max(a.x, b.x) + 1e-12 && p.y >= std::min(a.y, b.y) - 1e-12 &&
        p.y <= std::max(a.y, b.y) + 1e-12) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      in = !in;
    }
  }
  return in;
}

// Average ranks (ties share the mean rank), then Pearson on the ranks.
inline std::vector<double> ranks(std::span<double const> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double const mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

inline double spearman(std::span<double const> a, std::span<double const> b) {
  auto const ra = ranks(a), rb = ranks(b);
  double const n = static_cast<double>(a.size());
  double const ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double const mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Adjusted Rand index from the contingency table. Every label value,
// including -1, is treated as its own group.
inline double adjusted_rand_index(std::span<int const> truth, std::span<int const> pred) {
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    table[{truth[i], pred[i]}] += 1;
    rows[truth[i]] += 1;
    cols[pred[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, a = 0, b = 0;
  for (auto const& [k, v] : table) index += c2(v);
  for (auto const& [k, v] : rows) a += c2(v);
  for (auto const& [k, v] : cols) b += c2(v);
  double const expected = a * b / c2(static_cast<double>(truth.size()));
  double const max_index = (a + b) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace climsom::oracle
