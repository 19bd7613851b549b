#include "climsom/analysis.hpp"

#include <sstream>

#include "climsom/cluster.hpp"
#include "climsom/compare.hpp"
#include "climsom/distribution.hpp"
#include "climsom/error.hpp"
#include "climsom/json_io.hpp"
#include "climsom/transport.hpp"

namespace climsom {

using nlohmann::json;

AnalysisSnapshot AnalysisSnapshot::of(ProjectState const& state) {
  if (!state.som || !state.embedding) fail(ErrorKind::kConflict, "no trained SOM in the project");
  return {state.dataset, state.som, state.embedding, state.annotations};
}

std::vector<std::string> analysis_kinds() {
  return {"distribution",  "side-by-side",  "vector-field",
          "transitions",   "timeline-runs", "timeline-forcings"};
}

namespace {

json const* field(json const& req, char const* key) {
  if (!req.is_object()) invalid("request must be a JSON object");
  auto it = req.find(key);
  if (it == req.end() || it->is_null()) return nullptr;
  return &*it;
}

std::int64_t get_int(json const& req, char const* key, std::int64_t fallback) {
  auto const* v = field(req, key);
  if (!v) return fallback;
  if (v->is_number_integer()) return v->get<std::int64_t>();
  if (v->is_string()) {
    std::size_t used = 0;
    auto const text = v->get<std::string>();
    try {
      auto const parsed = std::stoll(text, &used);
      if (used == text.size()) return parsed;
    } catch (std::exception const&) {
    }
  }
  invalid(std::string("'") + key + "' must be an integer");
}

std::string get_string(json const& req, char const* key, std::string fallback) {
  auto const* v = field(req, key);
  if (!v) return fallback;
  if (!v->is_string()) invalid(std::string("'") + key + "' must be a string");
  return v->get<std::string>();
}

std::vector<std::string> get_list(json const& req, char const* key) {
  auto const* v = field(req, key);
  std::vector<std::string> out;
  if (!v) return out;
  if (v->is_array()) {
    for (auto const& item : *v) {
      if (!item.is_string()) invalid(std::string("'") + key + "' must list strings");
      out.push_back(item.get<std::string>());
    }
  } else if (v->is_string()) {
    std::stringstream ss(v->get<std::string>());
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) out.push_back(item);
    }
  } else {
    invalid(std::string("'") + key + "' must be a list");
  }
  return out;
}

std::vector<std::string> all_members(EnsembleDataset const& data) {
  std::vector<std::string> out;
  for (auto const& m : data.members) out.push_back(m.key());
  return out;
}

RunSelector selector_of(json const& req, EnsembleDataset const& data) {
  RunSelector s;
  s.members = get_list(req, "members");
  if (s.members.empty()) s.members = all_members(data);
  s.months = MonthFilter::parse(get_string(req, "months", "all"));
  return s;
}

json selector_json(RunSelector const& s) {
  return {{"members", s.members}, {"months", s.months.to_string()}};
}

json const& sub_request(json const& req, char const* key) {
  auto const* v = field(req, key);
  if (!v || !v->is_object()) invalid(std::string("'") + key + "' selector object is required");
  return *v;
}

KdeParams kde_params(json const& req) {
  KdeParams p;
  p.grid_res = static_cast<int>(get_int(req, "grid_res", p.grid_res));
  if (auto const* bw = field(req, "bandwidth")) p.bandwidth = io::vec2_from_json(*bw);
  return p;
}

FieldParams field_params(json const& req) {
  FieldParams p;
  p.k = static_cast<int>(get_int(req, "k", p.k));
  p.n = static_cast<int>(get_int(req, "n", p.n));
  auto const seed = get_int(req, "seed", 0);
  if (seed < 0) invalid("'seed' must be non-negative");
  p.seed = static_cast<std::uint64_t>(seed);
  return p;
}

HdbscanParams cluster_params(json const& req) {
  HdbscanParams p;
  p.min_cluster_size = static_cast<int>(get_int(req, "min_cluster_size", p.min_cluster_size));
  p.min_samples = static_cast<int>(get_int(req, "min_samples", p.min_samples));
  return p;
}

json points_json(std::vector<Vec2> const& points) {
  auto const agg = aggregate_points(points);
  json out = json::array();
  for (std::size_t i = 0; i < agg.points.size(); ++i) {
    out.push_back({{"x", agg.points[i].x}, {"y", agg.points[i].y}, {"count", agg.counts[i]}});
  }
  return out;
}


RunDistribution project(AnalysisSnapshot const& s, RunSelector selector) {
  return project_runs(*s.dataset, std::move(selector), *s.som, s.embedding->positions);
}

json distribution(AnalysisSnapshot const& s, json const& req) {
  auto const dist = project(s, selector_of(req, *s.dataset));
  auto const k = kde(dist.points, kde_params(req));
  return {{"selector", selector_json(dist.selector)},
          {"n_points", dist.points.size()},
          {"points", points_json(dist.points)},
          {"kde", io::to_json(k)},
          {"breakdown", io::to_json(annotation_breakdown(dist.points, s.annotations))}};
}

json side_by_side_view(AnalysisSnapshot const& s, json const& req) {
  auto const a = project(s, selector_of(sub_request(req, "source"), *s.dataset));
  auto const b = project(s, selector_of(sub_request(req, "target"), *s.dataset));
  auto const [ka, kb] = side_by_side(a.points, b.points, kde_params(req));
  return {{"source", {{"selector", selector_json(a.selector)}, {"kde", io::to_json(ka)}}},
          {"target", {{"selector", selector_json(b.selector)}, {"kde", io::to_json(kb)}}}};
}

json vector_field(AnalysisSnapshot const& s, json const& req) {
  auto const a = project(s, selector_of(sub_request(req, "source"), *s.dataset));
  auto const b = project(s, selector_of(sub_request(req, "target"), *s.dataset));
  auto const p = field_params(req);
  return {{"source", selector_json(a.selector)},
          {"target", selector_json(b.selector)},
          {"k", p.k},
          {"n", p.n},
          {"seed", p.seed},
          {"field", io::to_json(bootstrap_vector_field(a.points, b.points, p))}};
}

json transitions(AnalysisSnapshot const& s, json const& req) {
  auto const a = project(s, selector_of(sub_request(req, "source"), *s.dataset));
  auto const b = project(s, selector_of(sub_request(req, "target"), *s.dataset));
  auto const p = field_params(req);
  return {{"source", selector_json(a.selector)},
          {"target", selector_json(b.selector)},
          {"k", p.k},
          {"seed", p.seed},
          {"transitions",
           io::to_json(transition_matrix(a.points, b.points, s.annotations, p))}};
}

json timeline_runs(AnalysisSnapshot const& s, json const& req) {
  auto members = get_list(req, "members");
  if (members.empty()) members = all_members(*s.dataset);
  auto const months = MonthFilter::parse(get_string(req, "months", "all"));
  auto const params = cluster_params(req);
  auto const t =
      monthly_timeline(*s.dataset, members, months, *s.som, s.embedding->positions, params);
  return {{"months_filter", months.to_string()},
          {"min_cluster_size", params.min_cluster_size},
          {"min_samples", params.min_samples},
          {"timeline", io::to_json(t)}};
}

json timeline_forcings(AnalysisSnapshot const& s, json const& req) {
  auto const ssp = get_string(req, "ssp", "");
  if (ssp.empty()) invalid("'ssp' is required");
  auto gcms = get_list(req, "gcms");
  if (gcms.empty()) gcms = gcms_with_ssp(*s.dataset, ssp);
  if (gcms.empty()) fail(ErrorKind::kNotFound, "no GCM has both historical and " + ssp + " members");
  auto const months = MonthFilter::parse(get_string(req, "months", "all"));
  auto const fp = field_params(req);
  auto const cp = cluster_params(req);
  auto const t =
      forcing_timeline(*s.dataset, gcms, ssp, months, *s.som, s.embedding->positions, fp, cp);
  return {{"ssp", ssp},
          {"months_filter", months.to_string()},
          {"k", fp.k},
          {"n", fp.n},
          {"seed", fp.seed},
          {"min_cluster_size", cp.min_cluster_size},
          {"min_samples", cp.min_samples},
          {"timeline", io::to_json(t)}};
}

}  // namespace

std::string analysis_payload(std::string_view kind, AnalysisSnapshot const& snapshot,
                             json const& request) {
  if (!snapshot.dataset || !snapshot.som || !snapshot.embedding) {
    fail(ErrorKind::kConflict, "no trained SOM in the project");
  }
  json out;
  if (kind == "distribution") {
    out = distribution(snapshot, request);
  } else if (kind == "side-by-side") {
    out = side_by_side_view(snapshot, request);
  } else if (kind == "vector-field") {
    out = vector_field(snapshot, request);
  } else if (kind == "transitions") {
    out = transitions(snapshot, request);
  } else if (kind == "timeline-runs") {
    out = timeline_runs(snapshot, request);
  } else if (kind == "timeline-forcings") {
    out = timeline_forcings(snapshot, request);
  } else {
    fail(ErrorKind::kNotFound, "unknown analysis '" + std::string(kind) + "'");
  }
  return out.dump();
}

}  // namespace climsom
