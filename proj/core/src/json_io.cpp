#include "climsom/json_io.hpp"

#include <cmath>

#include "climsom/error.hpp"

namespace climsom::io {

json to_json(Vec2 v) { return json::array({v.x, v.y}); }

Vec2 vec2_from_json(json const& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    invalid("expected a point [x, y]");
  }
  Vec2 v{j[0].get<double>(), j[1].get<double>()};
  if (!std::isfinite(v.x) || !std::isfinite(v.y)) invalid("point coordinates must be finite");
  return v;
}

json to_json(Ring const& ring) {
  json out = json::array();
  for (auto p : ring) out.push_back(to_json(p));
  return out;
}

Ring ring_from_json(json const& j) {
  if (!j.is_array()) invalid("expected a list of points");
  Ring out;
  for (auto const& p : j) out.push_back(vec2_from_json(p));
  return out;
}

json to_json(Box const& b) {
  return {{"xmin", b.xmin}, {"ymin", b.ymin}, {"xmax", b.xmax}, {"ymax", b.ymax}};
}

Box box_from_json(json const& j) {
  try {
    Box b{j.at("xmin").get<double>(), j.at("ymin").get<double>(), j.at("xmax").get<double>(),
          j.at("ymax").get<double>()};
    if (!(b.xmax >= b.xmin) || !(b.ymax >= b.ymin)) invalid("box max must not be below min");
    return b;
  } catch (json::exception const& e) {
    invalid(std::string("malformed box: ") + e.what());
  }
}

json to_json(SomConfig const& c) {
  return {{"rows", c.rows},       {"cols", c.cols},
          {"kR", c.kR},           {"kS", c.kS},
          {"iterations", c.iterations},
          {"lr_initial", c.lr_initial},
          {"lr_final", c.lr_final},
          {"seed", c.seed}};
}

SomConfig som_config_from_json(json const& j, SomConfig c) {
  try {
    if (j.contains("rows")) c.rows = j["rows"].get<int>();
    if (j.contains("cols")) c.cols = j["cols"].get<int>();
    if (j.contains("kR")) c.kR = j["kR"].get<double>();
    if (j.contains("kS")) c.kS = j["kS"].get<double>();
    if (j.contains("iterations")) c.iterations = j["iterations"].get<std::int64_t>();
    if (j.contains("lr_initial")) c.lr_initial = j["lr_initial"].get<double>();
    if (j.contains("lr_final")) c.lr_final = j["lr_final"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (json::exception const& e) {
    invalid(std::string("malformed SOM config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(SomMetrics const& m) {
  return {{"quantization_error", m.quantization_error},
          {"topographic_error", m.topographic_error},
          {"explained_variance", m.explained_variance},
          {"mean_smoothness", m.mean_smoothness}};
}

json to_json(Annotation const& a) {
  return {{"id", a.id},
          {"label", a.label},
          {"polygon", to_json(a.polygon)},
          {"created_order", a.created_order}};
}

Annotation annotation_from_json(json const& j) {
  try {
    return make_annotation(j.at("id").get<int>(), j.at("label").get<std::string>(),
                           ring_from_json(j.at("polygon")), j.at("created_order").get<int>());
  } catch (json::exception const& e) {
    invalid(std::string("malformed annotation: ") + e.what());
  }
}

json to_json(Embedding const& e) {
  json positions = json::array();
  for (auto p : e.positions) positions.push_back(to_json(p));
  json anchors = json::array();
  for (auto const& [node, p] : e.anchors) anchors.push_back({{"node", node}, {"x", p.x}, {"y", p.y}});
  json edges = json::array();
  for (auto const& edge : e.graph.edges) edges.push_back(json::array({edge.a, edge.b, edge.target}));
  return {{"positions", positions},
          {"anchors", anchors},
          {"graph", {{"rows", e.graph.rows}, {"cols", e.graph.cols}, {"edges", edges}}},
          {"config",
           {{"max_iterations", e.config.max_iterations},
            {"tolerance", e.config.tolerance},
            {"initial_step", e.config.initial_step}}},
          {"status", to_string(e.status)},
          {"iterations", e.iterations}};
}

Embedding embedding_from_json(json const& j) {
  try {
    Embedding e;
    for (auto const& p : j.at("positions")) e.positions.push_back(vec2_from_json(p));
    for (auto const& a : j.at("anchors")) {
      e.anchors[a.at("node").get<int>()] = {a.at("x").get<double>(), a.at("y").get<double>()};
    }
    auto const& g = j.at("graph");
    e.graph.rows = g.at("rows").get<int>();
    e.graph.cols = g.at("cols").get<int>();
    for (auto const& edge : g.at("edges")) {
      e.graph.edges.push_back({edge.at(0).get<int>(), edge.at(1).get<int>(), edge.at(2).get<double>()});
    }
    auto const& c = j.at("config");
    e.config.max_iterations = c.at("max_iterations").get<int>();
    e.config.tolerance = c.at("tolerance").get<double>();
    e.config.initial_step = c.at("initial_step").get<double>();
    auto const status = j.at("status").get<std::string>();
    for (auto s : {MdeStatus::kConverged, MdeStatus::kMaxIterations, MdeStatus::kStalled,
                   MdeStatus::kCancelled}) {
      if (status == to_string(s)) e.status = s;
    }
    e.iterations = j.at("iterations").get<int>();
    if (e.positions.size() != static_cast<std::size_t>(e.graph.num_nodes())) {
      fail(ErrorKind::kDataError, "embedding size does not match its graph");
    }
    for (auto const& [node, p] : e.anchors) {
      if (node < 0 || node >= e.graph.num_nodes()) fail(ErrorKind::kDataError, "anchor out of range");
    }
    return e;
  } catch (json::exception const& ex) {
    fail(ErrorKind::kDataError, std::string("malformed embedding: ") + ex.what());
  }
}

json to_json(KdeResult const& k) {
  json contours = json::array();
  for (auto const& c : k.contours) {
    json rings = json::array();
    for (auto const& r : c.rings) rings.push_back(to_json(r));
    contours.push_back(
        {{"mass", c.mass}, {"threshold", c.threshold}, {"area", c.area}, {"rings", rings}});
  }
  return {{"box", to_json(k.box)},
          {"grid_res", k.grid_res},
          {"bandwidth", to_json(k.bandwidth)},
          {"density", k.density},
          {"contours", contours}};
}

json to_json(VectorField const& f) {
  json vectors = json::array();
  for (auto v : f.vectors) vectors.push_back(to_json(v));
  json support = json::array();
  for (auto s : f.support) support.push_back(s != 0);
  return {{"box", to_json(f.box)}, {"n", f.n}, {"vectors", vectors}, {"support", support}};
}

json to_json(TransitionMatrix const& m) {
  return {{"regions", m.regions},
          {"region_ids", m.region_ids},
          {"flows", m.flows},
          {"source_totals", m.source_totals}};
}

json to_json(AnnotationBreakdown const& b) {
  json shares = json::array();
  for (auto const& s : b.annotations) {
    shares.push_back({{"id", s.id}, {"label", s.label}, {"count", s.count}, {"fraction", s.fraction}});
  }
  return {{"annotations", shares},
          {"total", b.total},
          {"unannotated_count", b.unannotated_count},
          {"unannotated", b.unannotated}};
}

json to_json(MonthlyClusterTimeline const& t) {
  json months = json::array();
  for (auto const& m : t.months) {
    json clusters = json::array();
    for (auto const& c : m.clusters) {
      json members = json::array();
      for (auto e : c.entities) members.push_back(t.entities[e]);
      clusters.push_back({{"id", c.id},
                          {"position", c.position},
                          {"mean_anomaly", c.mean_anomaly},
                          {"noise", c.noise},
                          {"members", members}});
    }
    months.push_back({{"month", m.month}, {"clusters", clusters}, {"entity_cluster", m.entity_cluster}});
  }
  json lines = json::array();
  auto const per_entity = t.lines();
  for (std::size_t e = 0; e < t.entities.size(); ++e) {
    lines.push_back({{"entity", t.entities[e]}, {"clusters", per_entity[e]}});
  }
  return {{"entities", t.entities}, {"months", months}, {"lines", lines}};
}

}  // namespace climsom::io
