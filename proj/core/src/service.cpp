#include "climsom/service.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <httplib.h>
#include <json.hpp>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <stop_token>
#include <thread>

#include "climsom/analysis.hpp"
#include "climsom/annotate.hpp"
#include "climsom/json_io.hpp"

namespace climsom {

using nlohmann::json;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return 422;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kCancelled: return 409;
    case ErrorKind::kUnavailable: return 503;
    case ErrorKind::kDataError: return 500;
  }
  return 500;
}

char const* error_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kCancelled: return "cancelled";
    case ErrorKind::kUnavailable: return "unavailable";
    case ErrorKind::kDataError: return "data_error";
  }
  return "internal";
}

namespace {

struct Job {
  int id = 0;
  std::string state = "pending";
  double progress = 0.0;
  std::string message;
  std::stop_source stop;
  std::jthread thread;
};

json job_json(Job const& job) {
  return {{"id", job.id}, {"state", job.state}, {"progress", job.progress}, {"message", job.message}};
}

json parse_body(httplib::Request const& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (json::exception const& e) {
    invalid(std::string("request body is not valid JSON: ") + e.what());
  }
}

int path_int(httplib::Request const& req, int group = 1) {
  try {
    return std::stoi(req.matches[group].str());
  } catch (std::exception const&) {
    fail(ErrorKind::kNotFound, "unknown id");
  }
}

json region_json(ResolvedRegion const& r) {
  return {{"name", r.name},
          {"counties", r.counties},
          {"dropped", r.dropped},
          {"whole_domain", r.whole_domain}};
}

Cutoffs cutoffs_from(json const& body) {
  Cutoffs c;
  if (body.contains("cutoffs")) {
    auto const& v = body["cutoffs"];
    if (!v.is_array() || v.size() != 4) invalid("'cutoffs' must list four numbers");
    for (std::size_t i = 0; i < 4; ++i) c.values[i] = v[i].get<double>();
  }
  c.validate();
  return c;
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::unique_ptr<LlmClient> llm;

  mutable std::shared_mutex state_mutex;
  ProjectState state;
  std::uint64_t som_version = 0;
  std::uint64_t embedding_version = 0;
  std::uint64_t annotation_version = 0;
  std::optional<SomMetrics> metrics;

  std::mutex jobs_mutex;
  std::map<int, std::shared_ptr<Job>> jobs;
  std::shared_ptr<Job> active;
  int next_job = 1;

  std::mutex anchor_mutex;
  std::optional<std::stop_source> anchor_stop;

  std::mutex cache_mutex;
  std::map<std::string, std::string> cache;

  Impl(ProjectState s, ServiceOptions o)
      : options(std::move(o)),
        llm(make_llm_client(options.llm, options.stub_llm)),
        state(std::move(s)) {
    routes();
  }

  ~Impl() {
    server.stop();
    std::vector<std::shared_ptr<Job>> running;
    {
      std::lock_guard lock(jobs_mutex);
      for (auto& [id, job] : jobs) {
        job->stop.request_stop();
        running.push_back(job);
      }
    }
    for (auto& job : running) {
      if (job->thread.joinable()) job->thread.join();
    }
  }

  // --- helpers -----------------------------------------------------------

  using Handler = std::function<void(httplib::Request const&, httplib::Response&)>;

  Handler wrap(Handler h) {
    return [h = std::move(h)](httplib::Request const& req, httplib::Response& res) {
      auto send_error = [&](int status, std::string const& code, std::string const& message) {
        res.status = status;
        res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
      };
      try {
        h(req, res);
      } catch (Error const& e) {
        send_error(http_status(e.kind()), error_code(e.kind()), e.what());
      } catch (json::exception const& e) {
        send_error(422, "invalid_argument", e.what());
      } catch (std::exception const& e) {
        send_error(500, "internal", e.what());
      }
    };
  }

  static void reply(httplib::Response& res, json const& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void invalidate_cache() {
    std::lock_guard lock(cache_mutex);
    cache.clear();
  }

  void require_som(ProjectState const& s) const {
    if (!s.som || !s.embedding) fail(ErrorKind::kConflict, "no trained SOM in the project");
  }

  bool training_active() {
    std::lock_guard lock(jobs_mutex);
    return active && (active->state == "pending" || active->state == "running");
  }

  // --- training ----------------------------------------------------------

  json start_training(json const& body) {
    SomConfig config;
    MonthFilter months;
    std::shared_ptr<EnsembleDataset const> data;
    {
      std::shared_lock lock(state_mutex);
      config = io::som_config_from_json(body, state.config);
      months = body.contains("months") ? MonthFilter::parse(body["months"].get<std::string>())
                                       : state.months;
      data = state.dataset;
    }
    std::lock_guard lock(jobs_mutex);
    if (active && (active->state == "pending" || active->state == "running")) {
      fail(ErrorKind::kConflict, "a training job is already running");
    }
    auto job = std::make_shared<Job>();
    job->id = next_job++;
    jobs[job->id] = job;
    active = job;
    job->thread = std::jthread([this, job, config, months, data] {
      run_training(job, config, months, data);
    });
    return job_json(*job);
  }

  void set_job(std::shared_ptr<Job> const& job, std::string st, double progress, std::string msg) {
    std::lock_guard lock(jobs_mutex);
    job->state = std::move(st);
    job->progress = progress;
    job->message = std::move(msg);
  }

  void run_training(std::shared_ptr<Job> job, SomConfig config, MonthFilter months,
                    std::shared_ptr<EnsembleDataset const> data) {
    auto const token = job->stop.get_token();
    set_job(job, "running", 0.0, "");
    try {
      auto const samples = flatten_samples(*data, months);
      auto som = train_som(samples, config, [&](TrainProgress const& p) {
        {
          std::lock_guard lock(jobs_mutex);
          job->progress = p.total > 0 ? static_cast<double>(p.iteration) / p.total : 0.0;
          job->message = "qe=" + std::to_string(p.quantization_error);
        }
        return !token.stop_requested();
      });
      if (token.stop_requested()) fail(ErrorKind::kCancelled, "training cancelled");
      auto const metrics_now = som_metrics(som, samples);
      auto embedding = initial_embedding(som);
      {
        std::unique_lock lock(state_mutex);
        state.config = som.config();
        state.months = months;
        state.som = std::make_shared<SomGrid const>(std::move(som));
        state.embedding = std::move(embedding);
        metrics = metrics_now;
        ++som_version;
        ++embedding_version;
      }
      invalidate_cache();
      set_job(job, "done", 1.0, "trained");
    } catch (Error const& e) {
      if (e.kind() == ErrorKind::kCancelled) {
        std::lock_guard lock(jobs_mutex);
        job->state = "cancelled";
        job->message = e.what();
      } else {
        std::lock_guard lock(jobs_mutex);
        job->state = "failed";
        job->message = e.what();
      }
    } catch (std::exception const& e) {
      std::lock_guard lock(jobs_mutex);
      job->state = "failed";
      job->message = e.what();
    }
  }

  // --- SOM / embedding ---------------------------------------------------

  json nodes_json() {
    std::shared_ptr<SomGrid const> som;
    std::shared_ptr<Embedding const> emb;
    std::shared_ptr<EnsembleDataset const> data;
    std::optional<SomMetrics> known;
    MonthFilter months;
    std::uint64_t version = 0;
    {
      std::shared_lock lock(state_mutex);
      require_som(state);
      som = state.som;
      emb = state.embedding;
      data = state.dataset;
      known = metrics;
      months = state.months;
      version = som_version;
    }
    if (!known) {
      known = som_metrics(*som, flatten_samples(*data, months));
      std::unique_lock lock(state_mutex);
      if (som_version == version) metrics = known;
    }
    json nodes = json::array();
    for (std::size_t i = 0; i < som->num_nodes(); ++i) {
      auto const w = som->weight(i);
      nodes.push_back(std::vector<float>(w.begin(), w.end()));
    }
    json positions = json::array();
    for (auto p : emb->positions) positions.push_back(io::to_json(p));
    auto const mask = data->grid.valid_mask();
    return {{"rows", som->rows()},
            {"cols", som->cols()},
            {"dim", som->dim()},
            {"config", io::to_json(som->config())},
            {"metrics", io::to_json(*known)},
            {"grid",
             {{"rows", data->grid.rows},
              {"cols", data->grid.cols},
              {"lats", data->grid.lats},
              {"lons", data->grid.lons},
              {"valid_mask", std::vector<bool>(mask.begin(), mask.end())}}},
            {"positions", positions},
            {"nodes", nodes}};
  }

  json node_json(int node) {
    std::shared_lock lock(state_mutex);
    require_som(state);
    if (node < 0 || static_cast<std::size_t>(node) >= state.som->num_nodes()) {
      fail(ErrorKind::kNotFound, "unknown node " + std::to_string(node));
    }
    auto const w = state.som->weight(node);
    return {{"node", node},
            {"row", state.som->row_of(node)},
            {"col", state.som->col_of(node)},
            {"position", io::to_json(state.embedding->positions[node])},
            {"values", std::vector<float>(w.begin(), w.end())}};
  }

  json embedding_json() {
    std::shared_lock lock(state_mutex);
    require_som(state);
    auto const& e = *state.embedding;
    json anchors = json::array();
    for (auto const& [node, p] : e.anchors) anchors.push_back({{"node", node}, {"x", p.x}, {"y", p.y}});
    json positions = json::array();
    for (auto p : e.positions) positions.push_back(io::to_json(p));
    return {{"anchors", anchors},
            {"positions", positions},
            {"status", to_string(e.status)},
            {"iterations", e.iterations},
            {"version", embedding_version}};
  }

  json put_anchors(json const& body) {
    if (!body.contains("anchors") || !body["anchors"].is_array()) {
      invalid("'anchors' must be a list of {node, x, y}");
    }
    std::stop_source mine;
    {
      std::lock_guard lock(anchor_mutex);
      if (anchor_stop) anchor_stop->request_stop();
      anchor_stop = mine;
    }
    std::shared_ptr<Embedding const> current;
    std::uint64_t version = 0;
    {
      std::shared_lock lock(state_mutex);
      require_som(state);
      current = state.embedding;
      version = embedding_version;
    }
    AnchorMap anchors;
    for (auto const& a : body["anchors"]) {
      int const node = a.at("node").get<int>();
      if (node < 0 || node >= current->graph.num_nodes()) {
        fail(ErrorKind::kNotFound, "unknown node " + std::to_string(node));
      }
      anchors[node] = {a.at("x").get<double>(), a.at("y").get<double>()};
      if (!std::isfinite(anchors[node].x) || !std::isfinite(anchors[node].y)) {
        invalid("anchor coordinates must be finite");
      }
    }
    auto result = mde_project(current->graph, std::move(anchors), current->positions,
                              current->config, mine.get_token());
    if (mine.stop_requested() || result.status == MdeStatus::kCancelled) {
      fail(ErrorKind::kConflict, "superseded by a newer anchor update");
    }
    {
      std::unique_lock lock(state_mutex);
      if (embedding_version != version) {
        fail(ErrorKind::kConflict, "embedding changed while re-embedding");
      }
      state.embedding = std::make_shared<Embedding const>(std::move(result));
      ++embedding_version;
    }
    invalidate_cache();
    return embedding_json();
  }

  // --- annotations -------------------------------------------------------

  json annotations_json() {
    std::shared_lock lock(state_mutex);
    json out = json::array();
    for (auto const& a : state.annotations) out.push_back(io::to_json(a));
    return {{"annotations", out}, {"version", annotation_version}};
  }

  json create_annotation(json const& body) {
    auto const label = body.at("label").get<std::string>();
    auto polygon = io::ring_from_json(body.at("polygon"));
    json out;
    {
      std::unique_lock lock(state_mutex);
      auto a = make_annotation(state.next_annotation_id, label, std::move(polygon),
                               state.next_created_order);
      ++state.next_annotation_id;
      ++state.next_created_order;
      out = io::to_json(a);
      state.annotations.push_back(std::move(a));
      ++annotation_version;
    }
    invalidate_cache();
    return out;
  }

  json get_annotation(int id) {
    std::shared_lock lock(state_mutex);
    for (auto const& a : state.annotations) {
      if (a.id == id) return io::to_json(a);
    }
    fail(ErrorKind::kNotFound, "unknown annotation " + std::to_string(id));
  }

  json update_annotation(int id, json const& body) {
    json out;
    {
      std::unique_lock lock(state_mutex);
      auto it = std::find_if(state.annotations.begin(), state.annotations.end(),
                             [&](Annotation const& a) { return a.id == id; });
      if (it == state.annotations.end()) {
        fail(ErrorKind::kNotFound, "unknown annotation " + std::to_string(id));
      }
      auto label = body.contains("label") ? body["label"].get<std::string>() : it->label;
      auto polygon = body.contains("polygon") ? io::ring_from_json(body["polygon"]) : it->polygon;
      *it = make_annotation(id, std::move(label), std::move(polygon), it->created_order);
      out = io::to_json(*it);
      ++annotation_version;
    }
    invalidate_cache();
    return out;
  }

  void delete_annotation(int id) {
    {
      std::unique_lock lock(state_mutex);
      auto it = std::find_if(state.annotations.begin(), state.annotations.end(),
                             [&](Annotation const& a) { return a.id == id; });
      if (it == state.annotations.end()) {
        fail(ErrorKind::kNotFound, "unknown annotation " + std::to_string(id));
      }
      state.annotations.erase(it);
      ++annotation_version;
    }
    invalidate_cache();
  }

  // --- LLM ---------------------------------------------------------------

  ProjectState llm_snapshot() {
    std::shared_lock lock(state_mutex);
    require_som(state);
    if (!state.counties) fail(ErrorKind::kConflict, "no county boundaries loaded");
    return state;
  }

  json forward(json const& body) {
    auto const question = body.at("question").get<std::string>();
    if (question.empty()) invalid("'question' must not be empty");
    auto const s = llm_snapshot();
    auto const filter = parse_forward_query(question, *llm, *s.counties);
    auto const result = apply_filter(filter, *s.som, s.dataset->grid, s.embedding->positions);
    return {{"question", question},
            {"filter",
             {{"kind", to_string(filter.kind)},
              {"x", filter.x},
              {"y", filter.y ? json(*filter.y) : json(nullptr)},
              {"region_a", region_json(filter.region_a)},
              {"region_b", filter.region_b ? region_json(*filter.region_b) : json(nullptr)}}},
            {"nodes", result.nodes},
            {"boundary", io::to_json(result.boundary)}};
  }

  json backward(json const& body) {
    auto const s = llm_snapshot();
    Ring ring;
    if (body.contains("annotation_id")) {
      int const id = body["annotation_id"].get<int>();
      auto it = std::find_if(s.annotations.begin(), s.annotations.end(),
                             [&](Annotation const& a) { return a.id == id; });
      if (it == s.annotations.end()) fail(ErrorKind::kNotFound, "unknown annotation");
      ring = it->polygon;
    } else {
      ring = io::ring_from_json(body.at("polygon"));
    }
    auto const samples = body.value("samples", 9);
    if (samples < 1) invalid("'samples' must be >= 1");
    auto const buckets = bucket_nodes(ring, *s.som, s.dataset->grid, s.embedding->positions,
                                      *s.counties, cutoffs_from(body),
                                      static_cast<std::size_t>(samples));
    auto const summary = summarize_region(buckets.nodes, *llm, options.llm.max_in_flight);
    json nodes = json::array();
    for (std::size_t i = 0; i < buckets.nodes.size(); ++i) {
      json b = json::object(), p = json::object();
      for (int k = 0; k < 5; ++k) {
        b[kBucketKeys[k]] = buckets.nodes[i].counties[k];
        p[kBucketKeys[k]] = summary.phrases[i][k];
      }
      nodes.push_back({{"node", buckets.nodes[i].node}, {"buckets", b}, {"phrases", p}});
    }
    return {{"nodes", nodes},
            {"summary", summary.summary},
            {"uncovered_counties", buckets.uncovered_counties}};
  }

  // --- analysis ----------------------------------------------------------

  std::string analysis(std::string const& kind, json const& request) {
    AnalysisSnapshot snap;
    std::string key;
    {
      std::shared_lock lock(state_mutex);
      snap = AnalysisSnapshot::of(state);
      key = kind + "\n" + request.dump() + "\n" + std::to_string(som_version) + "/" +
            std::to_string(embedding_version) + "/" + std::to_string(annotation_version);
    }
    {
      std::lock_guard lock(cache_mutex);
      if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto body = analysis_payload(kind, snap, request);
    std::lock_guard lock(cache_mutex);
    if (cache.size() >= options.cache_entries) cache.clear();
    cache.emplace(key, body);
    return body;
  }

  static json query_json(httplib::Request const& req) {
    json out = json::object();
    for (auto const& [k, v] : req.params) out[k] = v;
    return out;
  }

  // --- project -----------------------------------------------------------

  json put_project(json const& body) {
    auto const action = body.value("action", std::string("save"));
    std::optional<std::filesystem::path> path = options.project_path;
    if (body.contains("path")) path = body["path"].get<std::string>();
    if (!path) invalid("no project path given");
    if (action == "save") {
      std::shared_lock lock(state_mutex);
      save_project(state, *path);
      return {{"saved", path->generic_string()}};
    }
    if (action == "load") {
      if (training_active()) fail(ErrorKind::kConflict, "a training job is running");
      auto loaded = load_project(*path);
      {
        std::unique_lock lock(state_mutex);
        state = std::move(loaded);
        metrics.reset();
        ++som_version;
        ++embedding_version;
        ++annotation_version;
      }
      options.project_path = path;
      invalidate_cache();
      return {{"loaded", path->generic_string()}};
    }
    invalid("'action' must be save or load");
  }

  json get_project() {
    std::shared_lock lock(state_mutex);
    auto const base = options.project_path ? options.project_path->parent_path()
                                           : std::filesystem::current_path();
    auto const name = options.project_path ? options.project_path->stem().string() + ".som"
                                           : std::string("project.som");
    return json::parse(encode_project(state, base, name));
  }

  // --- routing -----------------------------------------------------------

  void routes() {
    auto& s = server;
    s.Get("/health", wrap([](auto const&, auto& res) { reply(res, {{"status", "ok"}}); }));
    s.Post("/som/train", wrap([this](auto const& req, auto& res) {
      reply(res, start_training(parse_body(req)), 202);
    }));
    s.Get(R"(/jobs/(\d+))", wrap([this](auto const& req, auto& res) {
      std::lock_guard lock(jobs_mutex);
      auto it = jobs.find(path_int(req));
      if (it == jobs.end()) fail(ErrorKind::kNotFound, "unknown job");
      reply(res, job_json(*it->second));
    }));
    s.Post(R"(/jobs/(\d+)/cancel)", wrap([this](auto const& req, auto& res) {
      std::lock_guard lock(jobs_mutex);
      auto it = jobs.find(path_int(req));
      if (it == jobs.end()) fail(ErrorKind::kNotFound, "unknown job");
      it->second->stop.request_stop();
      reply(res, job_json(*it->second), 202);
    }));
    s.Get("/som/nodes", wrap([this](auto const&, auto& res) { reply(res, nodes_json()); }));
    s.Get(R"(/som/node/(\d+))",
          wrap([this](auto const& req, auto& res) { reply(res, node_json(path_int(req))); }));
    s.Get("/embedding", wrap([this](auto const&, auto& res) { reply(res, embedding_json()); }));
    s.Get("/embedding/anchors",
          wrap([this](auto const&, auto& res) { reply(res, embedding_json()); }));
    s.Put("/embedding/anchors", wrap([this](auto const& req, auto& res) {
      reply(res, put_anchors(parse_body(req)));
    }));
    s.Get("/annotations", wrap([this](auto const&, auto& res) { reply(res, annotations_json()); }));
    s.Post("/annotations", wrap([this](auto const& req, auto& res) {
      reply(res, create_annotation(parse_body(req)), 201);
    }));
    s.Get(R"(/annotations/(\d+))", wrap([this](auto const& req, auto& res) {
      reply(res, get_annotation(path_int(req)));
    }));
    s.Put(R"(/annotations/(\d+))", wrap([this](auto const& req, auto& res) {
      reply(res, update_annotation(path_int(req), parse_body(req)));
    }));
    s.Delete(R"(/annotations/(\d+))", wrap([this](auto const& req, auto& res) {
      delete_annotation(path_int(req));
      res.status = 204;
    }));
    s.Post("/llm/forward",
           wrap([this](auto const& req, auto& res) { reply(res, forward(parse_body(req))); }));
    s.Post("/llm/backward",
           wrap([this](auto const& req, auto& res) { reply(res, backward(parse_body(req))); }));
    for (auto const& kind : {"distribution", "side-by-side", "vector-field", "transitions"}) {
      s.Post(std::string("/analysis/") + kind,
             wrap([this, kind = std::string(kind)](auto const& req, auto& res) {
               res.set_content(analysis(kind, parse_body(req)), "application/json");
             }));
    }
    s.Get("/analysis/timeline/runs", wrap([this](auto const& req, auto& res) {
      res.set_content(analysis("timeline-runs", query_json(req)), "application/json");
    }));
    s.Get("/analysis/timeline/forcings", wrap([this](auto const& req, auto& res) {
      res.set_content(analysis("timeline-forcings", query_json(req)), "application/json");
    }));
    s.Get("/project", wrap([this](auto const&, auto& res) { reply(res, get_project()); }));
    s.Put("/project",
          wrap([this](auto const& req, auto& res) { reply(res, put_project(parse_body(req))); }));
  }
};

Service::Service(ProjectState state, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(state), std::move(options))) {}

Service::~Service() = default;

bool Service::listen(std::string const& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_to_any_port(std::string const& host) {
  return impl_->server.bind_to_any_port(host);
}

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

ProjectState Service::snapshot() const {
  std::shared_lock lock(impl_->state_mutex);
  return impl_->state;
}

}  // namespace climsom
