#include "climsom/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "climsom/error.hpp"
#include "climsom/mds.hpp"
#include "climsom/transport.hpp"
#include "parallel.hpp"

namespace climsom {

DistanceMatrix emd_matrix(std::vector<std::string> labels,
                          std::span<std::vector<Vec2> const> distributions, unsigned threads) {
  if (distributions.size() < 2) invalid("emd_matrix needs at least two distributions");
  if (labels.size() != distributions.size()) invalid("one label per distribution required");
  for (auto const& d : distributions) {
    if (d.empty()) invalid("empty distribution");
  }
  auto const n = distributions.size();
  DistanceMatrix out{std::move(labels), std::vector<double>(n * n, 0.0)};
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  detail::parallel_for(
      pairs.size(),
      [&](std::size_t p) {
        auto const [i, j] = pairs[p];
        double const cost = optimal_transport(distributions[i], distributions[j]).cost;
        out.d[i * n + j] = cost;
        out.d[j * n + i] = cost;
      },
      threads);
  return out;
}

ClusterAssignment embed_cluster(DistanceMatrix const& distances, HdbscanParams const& params) {
  auto const n = distances.size();
  if (distances.d.size() != n * n) invalid("distance matrix must be n x n");
  if (n < static_cast<std::size_t>(params.min_cluster_size)) {
    invalid("fewer entities than min_cluster_size");
  }
  auto const coords = classical_mds(distances.d, n, 2);
  ClusterAssignment out;
  out.labels = distances.labels;
  for (std::size_t i = 0; i < n; ++i) out.embedding.push_back({coords[2 * i], coords[2 * i + 1]});
  std::vector<double> ed(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) ed[i * n + j] = distance(out.embedding[i], out.embedding[j]);
  }
  out.cluster = hdbscan(ed, n, params);
  for (int c : out.cluster) out.num_clusters = std::max(out.num_clusters, c + 1);
  return out;
}

std::vector<double> mds_1d(DistanceMatrix const& distances) {
  return classical_mds(distances.d, distances.size(), 1);
}

std::vector<std::vector<int>> MonthlyClusterTimeline::lines() const {
  std::vector<std::vector<int>> out(entities.size());
  for (auto const& m : months) {
    for (std::size_t e = 0; e < entities.size(); ++e) out[e].push_back(m.entity_cluster[e]);
  }
  return out;
}

namespace {

// Clusters of one month: real clusters first, then a singleton per noise
// entity in entity order.
TimelineMonth group_entities(int month, ClusterAssignment const& assignment) {
  TimelineMonth out;
  out.month = month;
  out.clusters.resize(assignment.num_clusters);
  for (int c = 0; c < assignment.num_clusters; ++c) out.clusters[c].id = c;
  out.entity_cluster.resize(assignment.cluster.size());
  for (std::size_t e = 0; e < assignment.cluster.size(); ++e) {
    int c = assignment.cluster[e];
    if (c < 0) {
      c = static_cast<int>(out.clusters.size());
      out.clusters.push_back({c, 0.0, 0.0, true, {}});
    }
    out.clusters[c].entities.push_back(e);
    out.entity_cluster[e] = c;
  }
  return out;
}

// 1D MDS placement, oriented so the lowest-anomaly cluster sits below 0.
void place_clusters(TimelineMonth& month, DistanceMatrix const& between) {
  if (month.clusters.size() < 2) {
    for (auto& c : month.clusters) c.position = 0.0;
    return;
  }
  auto positions = mds_1d(between);
  std::size_t lowest = 0;
  for (std::size_t c = 1; c < month.clusters.size(); ++c) {
    if (month.clusters[c].mean_anomaly < month.clusters[lowest].mean_anomaly) lowest = c;
  }
  if (positions[lowest] > 0) {
    for (double& p : positions) p = -p;
  }
  for (std::size_t c = 0; c < month.clusters.size(); ++c) month.clusters[c].position = positions[c];
}

std::vector<std::string> cluster_labels(TimelineMonth const& month) {
  std::vector<std::string> out;
  for (auto const& c : month.clusters) out.push_back(std::to_string(c.id));
  return out;
}

std::vector<std::vector<double>> step_means(EnsembleDataset const& dataset,
                                            std::span<std::size_t const> members) {
  std::vector<std::vector<double>> out(dataset.members.size());
  for (auto m : members) {
    if (!out[m].empty()) continue;
    out[m].resize(dataset.time_len());
    for (std::size_t t = 0; t < dataset.time_len(); ++t) out[m][t] = spatial_mean(dataset.step(m, t));
  }
  return out;
}

// Months of the filter that occur in the dataset, ascending.
std::vector<int> present_months(EnsembleDataset const& dataset, MonthFilter const& months) {
  std::vector<int> out;
  for (int m : months.months()) {
    if (std::find(dataset.time.months.begin(), dataset.time.months.end(), m) !=
        dataset.time.months.end()) {
      out.push_back(m);
    }
  }
  if (out.empty()) invalid("none of the selected months occur in the dataset");
  return out;
}

}  // namespace

MonthlyClusterTimeline monthly_timeline(EnsembleDataset const& dataset,
                                        std::vector<std::string> const& members,
                                        MonthFilter const& months, SomGrid const& grid,
                                        std::span<Vec2 const> positions,
                                        HdbscanParams const& params) {
  if (members.empty()) invalid("empty selection");
  if (months.empty()) invalid("empty month filter");
  if (positions.size() != grid.num_nodes()) invalid("embedding does not match the SOM");
  if (members.size() < static_cast<std::size_t>(params.min_cluster_size)) {
    invalid("month with fewer entities than min_cluster_size");
  }
  std::vector<std::size_t> index;
  for (auto const& key : members) index.push_back(dataset.member_index(key));
  auto const bmus = bmu_table(dataset, grid, index);
  auto const means = step_means(dataset, index);

  MonthlyClusterTimeline out;
  out.entities = members;
  for (int month : present_months(dataset, months)) {
    auto const filter = MonthFilter::of(std::vector<int>{month});
    std::vector<std::vector<Vec2>> dists;
    std::vector<double> anomaly_sum(members.size(), 0.0);
    std::vector<std::size_t> steps(members.size(), 0);
    for (std::size_t e = 0; e < members.size(); ++e) {
      dists.push_back(project_runs(dataset, {{members[e]}, filter}, bmus, positions).points);
      for (std::size_t t = 0; t < dataset.time_len(); ++t) {
        if (dataset.time.months[t] != month) continue;
        anomaly_sum[e] += means[index[e]][t];
        ++steps[e];
      }
    }
    auto const assignment = embed_cluster(emd_matrix(members, dists), params);
    auto tm = group_entities(month, assignment);

    std::vector<std::vector<Vec2>> aggregates;
    for (auto& c : tm.clusters) {
      std::vector<Vec2> pooled;
      double sum = 0.0;
      std::size_t count = 0;
      for (auto e : c.entities) {
        pooled.insert(pooled.end(), dists[e].begin(), dists[e].end());
        sum += anomaly_sum[e];
        count += steps[e];
      }
      c.mean_anomaly = count > 0 ? sum / static_cast<double>(count) : 0.0;
      aggregates.push_back(std::move(pooled));
    }
    if (tm.clusters.size() >= 2) {
      place_clusters(tm, emd_matrix(cluster_labels(tm), aggregates));
    } else {
      place_clusters(tm, {});
    }
    out.months.push_back(std::move(tm));
  }
  return out;
}

std::vector<std::string> gcms_with_ssp(EnsembleDataset const& dataset, std::string const& ssp) {
  std::set<std::string> hist, future;
  for (auto const& m : dataset.members) {
    if (m.ssp == "historical") hist.insert(m.gcm);
    if (m.ssp == ssp) future.insert(m.gcm);
  }
  std::vector<std::string> out;
  std::set_intersection(hist.begin(), hist.end(), future.begin(), future.end(),
                        std::back_inserter(out));
  return out;
}

namespace {

std::vector<std::size_t> members_of(EnsembleDataset const& dataset, std::string const& gcm,
                                    std::string const& ssp) {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < dataset.members.size(); ++m) {
    if (dataset.members[m].gcm == gcm && dataset.members[m].ssp == ssp) out.push_back(m);
  }
  if (out.empty()) fail(ErrorKind::kNotFound, "missing member: " + gcm + " " + ssp);
  return out;
}

std::vector<Vec2> pooled_points(EnsembleDataset const& dataset, std::span<std::size_t const> members,
                                MonthFilter const& months, std::vector<std::vector<int>> const& bmus,
                                std::span<Vec2 const> positions) {
  RunSelector selector;
  for (auto m : members) selector.members.push_back(dataset.members[m].key());
  selector.months = months;
  return project_runs(dataset, std::move(selector), bmus, positions).points;
}

}  // namespace

VectorField forcing_field(EnsembleDataset const& dataset, std::string const& gcm,
                          std::string const& ssp, MonthFilter const& months,
                          std::vector<std::vector<int>> const& bmus,
                          std::span<Vec2 const> positions, FieldParams params) {
  if (ssp == "historical") invalid("forcing needs a non-historical scenario");
  auto const hist = members_of(dataset, gcm, "historical");
  auto const future = members_of(dataset, gcm, ssp);
  if (!params.box) params.box = bounding_box(positions);
  return bootstrap_vector_field(pooled_points(dataset, hist, months, bmus, positions),
                                pooled_points(dataset, future, months, bmus, positions), params);
}

VectorField forcing_field(EnsembleDataset const& dataset, std::string const& gcm,
                          std::string const& ssp, MonthFilter const& months, SomGrid const& grid,
                          std::span<Vec2 const> positions, FieldParams params) {
  if (positions.size() != grid.num_nodes()) invalid("embedding does not match the SOM");
  auto index = members_of(dataset, gcm, "historical");
  auto const future = members_of(dataset, gcm, ssp);
  index.insert(index.end(), future.begin(), future.end());
  return forcing_field(dataset, gcm, ssp, months, bmu_table(dataset, grid, index), positions,
                       std::move(params));
}

double field_distance(VectorField const& a, VectorField const& b) {
  if (a.n != b.n || !(a.box == b.box)) invalid("fields differ in resolution or box");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < a.vectors.size(); ++c) {
    if (!a.support[c] || !b.support[c]) continue;
    double const na = norm(a.vectors[c]);
    double const nb = norm(b.vectors[c]);
    if (na < 1e-9 || nb < 1e-9) continue;
    sum += std::clamp(dot(a.vectors[c], b.vectors[c]) / (na * nb), -1.0, 1.0);
    ++count;
  }
  if (count == 0) invalid("no jointly supported non-degenerate cells");
  return 1.0 - sum / static_cast<double>(count);
}

VectorField mean_field(std::span<VectorField const> fields) {
  if (fields.empty()) invalid("no fields to average");
  VectorField out = fields[0];
  for (auto const& f : fields) {
    if (f.n != out.n || !(f.box == out.box)) invalid("fields differ in resolution or box");
  }
  for (std::size_t c = 0; c < out.vectors.size(); ++c) {
    Vec2 acc;
    int count = 0;
    for (auto const& f : fields) {
      if (f.support[c]) {
        acc = acc + f.vectors[c];
        ++count;
      }
    }
    out.vectors[c] = count > 0 ? (1.0 / count) * acc : Vec2{};
    out.support[c] = count > 0 ? 1 : 0;
  }
  return out;
}

MonthlyClusterTimeline forcing_timeline(EnsembleDataset const& dataset,
                                        std::vector<std::string> const& gcms,
                                        std::string const& ssp, MonthFilter const& months,
                                        SomGrid const& grid, std::span<Vec2 const> positions,
                                        FieldParams const& field, HdbscanParams const& params) {
  if (gcms.empty()) invalid("empty selection");
  if (months.empty()) invalid("empty month filter");
  if (positions.size() != grid.num_nodes()) invalid("embedding does not match the SOM");
  if (gcms.size() > 1 && gcms.size() < static_cast<std::size_t>(params.min_cluster_size)) {
    invalid("fewer GCMs than min_cluster_size");
  }
  std::vector<std::vector<std::size_t>> hist, future;
  std::vector<std::size_t> index;
  for (auto const& g : gcms) {
    hist.push_back(members_of(dataset, g, "historical"));
    future.push_back(members_of(dataset, g, ssp));
    index.insert(index.end(), hist.back().begin(), hist.back().end());
    index.insert(index.end(), future.back().begin(), future.back().end());
  }
  auto const bmus = bmu_table(dataset, grid, index);
  auto const means = step_means(dataset, index);
  auto mean_over = [&](std::span<std::size_t const> ms, int month) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto m : ms) {
      for (std::size_t t = 0; t < dataset.time_len(); ++t) {
        if (dataset.time.months[t] != month) continue;
        sum += means[m][t];
        ++count;
      }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
  };

  // Fields with no jointly supported cells carry no directional evidence;
  // they are treated as orthogonal.
  auto timeline_distance = [](VectorField const& a, VectorField const& b) {
    try {
      return field_distance(a, b);
    } catch (Error const& e) {
      if (e.kind() != ErrorKind::kInvalidArgument) throw;
      return 1.0;
    }
  };

  MonthlyClusterTimeline out;
  out.entities = gcms;
  for (int month : present_months(dataset, months)) {
    auto const filter = MonthFilter::of(std::vector<int>{month});
    std::vector<VectorField> fields;
    std::vector<double> change;
    for (std::size_t g = 0; g < gcms.size(); ++g) {
      fields.push_back(forcing_field(dataset, gcms[g], ssp, filter, bmus, positions, field));
      change.push_back(mean_over(future[g], month) - mean_over(hist[g], month));
    }
    ClusterAssignment assignment;
    if (gcms.size() == 1) {
      assignment.labels = gcms;
      assignment.cluster = {-1};
    } else {
      DistanceMatrix d{gcms, std::vector<double>(gcms.size() * gcms.size(), 0.0)};
      for (std::size_t i = 0; i < gcms.size(); ++i) {
        for (std::size_t j = i + 1; j < gcms.size(); ++j) {
          double const v = timeline_distance(fields[i], fields[j]);
          d.d[i * gcms.size() + j] = v;
          d.d[j * gcms.size() + i] = v;
        }
      }
      assignment = embed_cluster(d, params);
    }
    auto tm = group_entities(month, assignment);
    std::vector<VectorField> representatives;
    for (auto& c : tm.clusters) {
      std::vector<VectorField> members_fields;
      double sum = 0.0;
      for (auto e : c.entities) {
        members_fields.push_back(fields[e]);
        sum += change[e];
      }
      c.mean_anomaly = sum / static_cast<double>(c.entities.size());
      representatives.push_back(mean_field(members_fields));
    }
    DistanceMatrix between{cluster_labels(tm), {}};
    auto const k = tm.clusters.size();
    between.d.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double const v = timeline_distance(representatives[i], representatives[j]);
        between.d[i * k + j] = v;
        between.d[j * k + i] = v;
      }
    }
    place_clusters(tm, between);
    out.months.push_back(std::move(tm));
  }
  return out;
}

}  // namespace climsom
