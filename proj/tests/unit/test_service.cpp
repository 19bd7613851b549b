#include <doctest.h>

#include <chrono>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "climsom/analysis.hpp"
#include "climsom/distribution.hpp"
#include "climsom/service.hpp"
#include "fixtures.hpp"

using namespace climsom;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// One county covering the synthetic 4x4 raster, one covering its west half.
std::string domain_counties() {
  json features = json::array();
  features.push_back(fixture::box_feature("Whole County", "CA", -124.5, 31.5, -120.5, 35.5));
  features.push_back(fixture::box_feature("West County", "CA", -124.5, 31.5, -122.5, 35.5));
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

struct Running {
  fixture::ProjectFixture fx;
  std::unique_ptr<Service> service;
  std::jthread thread;
  std::unique_ptr<httplib::Client> http;

  explicit Running(std::string const& tag, bool with_counties = true) {
    fx = fixture::trained_project(tag);
    auto state = load_project(fx.project);
    if (with_counties) {
      state.counties = std::make_shared<CountyIndex const>(parse_counties(domain_counties()));
    }
    ServiceOptions opts;
    opts.stub_llm = true;
    opts.project_path = fx.dir / "saved.json";
    service = std::make_unique<Service>(std::move(state), opts);
    int const port = service->bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::jthread([this] { service->listen_after_bind(); });
    service->wait_until_ready();
    http = std::make_unique<httplib::Client>("127.0.0.1", port);
    http->set_read_timeout(120, 0);
  }
  ~Running() {
    service->stop();
    thread.join();
    fs::remove_all(fx.dir);
  }

  httplib::Result post(std::string const& path, json const& body) {
    return http->Post(path, body.dump(), "application/json");
  }
  httplib::Result put(std::string const& path, json const& body) {
    return http->Put(path, body.dump(), "application/json");
  }
};

json body_of(httplib::Result const& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("status mapping") {
  CHECK(http_status(ErrorKind::kInvalidArgument) == 422);
  CHECK(http_status(ErrorKind::kNotFound) == 404);
  CHECK(http_status(ErrorKind::kConflict) == 409);
  CHECK(http_status(ErrorKind::kUnavailable) == 503);
  CHECK(std::string(error_code(ErrorKind::kNotFound)) == "not_found");
}

TEST_CASE("nodes and single node") {
  Running s("svc-nodes");
  auto const r = s.http->Get("/som/nodes");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto const j = body_of(r);
  CHECK(j["rows"] == 5);
  CHECK(j["nodes"].size() == 25);
  CHECK(j["positions"].size() == 25);
  CHECK(j["metrics"].contains("explained_variance"));
  auto const one = s.http->Get("/som/node/7");
  CHECK(body_of(one)["row"] == 1);
  CHECK(body_of(one)["values"].size() == 16);
  CHECK(s.http->Get("/som/node/99")->status == 404);
}

TEST_CASE("a second concurrent training job is rejected") {
  Running s("svc-train");
  auto const first = s.post("/som/train", {{"rows", 6}, {"cols", 6}, {"iterations", 20000000}});
  REQUIRE(first);
  CHECK(first->status == 202);
  int const id = body_of(first)["id"];
  auto const second = s.post("/som/train", {{"rows", 6}, {"cols", 6}, {"iterations", 100}});
  CHECK(second->status == 409);
  CHECK(body_of(second)["code"] == "conflict");
  CHECK(s.http->Post("/jobs/" + std::to_string(id) + "/cancel")->status == 202);
  std::string state;
  for (int i = 0; i < 200; ++i) {
    state = body_of(s.http->Get("/jobs/" + std::to_string(id)))["state"];
    if (state != "pending" && state != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  CHECK(state == "cancelled");
  CHECK(s.http->Get("/jobs/999")->status == 404);
}

TEST_CASE("training completes and replaces the SOM") {
  Running s("svc-train2");
  auto const r = s.post("/som/train", {{"rows", 3}, {"cols", 4}, {"iterations", 500}, {"seed", 1}});
  int const id = body_of(r)["id"];
  std::string state;
  for (int i = 0; i < 500; ++i) {
    state = body_of(s.http->Get("/jobs/" + std::to_string(id)))["state"];
    if (state != "pending" && state != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  CHECK(state == "done");
  CHECK(body_of(s.http->Get("/som/nodes"))["nodes"].size() == 12);
}

TEST_CASE("anchors: put then get, all anchored") {
  Running s("svc-anchor");
  json anchors = json::array();
  for (int k = 0; k < 25; ++k) anchors.push_back({{"node", k}, {"x", k % 5}, {"y", k / 5}});
  auto const put = s.put("/embedding/anchors", {{"anchors", anchors}});
  REQUIRE(put);
  CHECK(put->status == 200);
  auto const got = body_of(s.http->Get("/embedding/anchors"));
  CHECK(got["anchors"].size() == 25);
  for (int k = 0; k < 25; ++k) {
    CHECK(got["positions"][k][0] == k % 5);
    CHECK(got["positions"][k][1] == k / 5);
  }
  CHECK(s.put("/embedding/anchors", {{"anchors", {{{"node", 40}, {"x", 0}, {"y", 0}}}}})->status == 404);
  CHECK(s.put("/embedding/anchors", {{"nope", 1}})->status == 422);
}

TEST_CASE("annotation CRUD") {
  Running s("svc-ann");
  auto const created = s.post("/annotations", {{"label", "wet"}, {"polygon", {{0, 0}, {1, 0}, {1, 1}}}});
  REQUIRE(created);
  CHECK(created->status == 201);
  int const id = body_of(created)["id"];
  CHECK(body_of(s.http->Get("/annotations/" + std::to_string(id)))["label"] == "wet");
  auto const updated = s.put("/annotations/" + std::to_string(id), {{"label", "wetter"}});
  CHECK(body_of(updated)["label"] == "wetter");
  CHECK(s.post("/annotations", {{"label", "bowtie"}, {"polygon", {{0, 0}, {1, 1}, {1, 0}, {0, 1}}}})->status == 422);
  CHECK(s.post("/annotations", {{"polygon", {{0, 0}, {1, 0}, {1, 1}}}})->status == 422);
  CHECK(s.http->Delete("/annotations/" + std::to_string(id))->status == 204);
  CHECK(s.http->Get("/annotations/" + std::to_string(id))->status == 404);
  CHECK(s.http->Delete("/annotations/" + std::to_string(id))->status == 404);
  CHECK(body_of(s.http->Get("/annotations"))["annotations"].empty());
}

TEST_CASE("distribution matches the library and repeats identically") {
  Running s("svc-dist");
  auto const state = s.service->snapshot();
  auto const key = state.dataset->members[1].key();
  json const req{{"members", json::array({key})}, {"months", "1-6"}, {"grid_res", 24}};
  auto const a = s.post("/analysis/distribution", req);
  auto const b = s.post("/analysis/distribution", req);
  REQUIRE(a);
  CHECK(a->status == 200);
  CHECK(a->body == b->body);
  CHECK(a->body == analysis_payload("distribution", AnalysisSnapshot::of(state), req));

  auto const runs = project_runs(*state.dataset, {{key}, MonthFilter::parse("1-6")}, *state.som,
                                 state.embedding->positions);
  CHECK(body_of(a).dump().find("\"total\":" + std::to_string(runs.points.size())) != std::string::npos);

  CHECK(s.post("/analysis/distribution", {{"members", "no:such:member"}})->status == 404);
  CHECK(s.post("/analysis/distribution", {{"members", key}, {"months", "13"}})->status == 422);
  CHECK(s.http->Post("/analysis/distribution", "{oops", "application/json")->status == 422);
}

TEST_CASE("annotation edits invalidate cached analyses") {
  Running s("svc-cache");
  auto const key = s.service->snapshot().dataset->members[0].key();
  json const req{{"members", key}, {"grid_res", 16}};
  auto const before = s.post("/analysis/distribution", req)->body;
  s.post("/annotations", {{"label", "all"}, {"polygon", {{-9, -9}, {9, -9}, {9, 9}, {-9, 9}}}});
  auto const after = s.post("/analysis/distribution", req)->body;
  CHECK(before != after);
  CHECK(after.find("\"all\"") != std::string::npos);
}

TEST_CASE("forward and backward LLM endpoints with the stub") {
  Running s("svc-llm");
  auto const f = s.post("/llm/forward", {{"question", "nodes with average precipitation over all above 0"}});
  REQUIRE(f);
  CHECK(f->status == 200);
  auto const j = body_of(f);
  CHECK(j["filter"]["kind"] == "threshold_above");
  CHECK(j["filter"]["region_a"].dump().find("true") != std::string::npos);
  CHECK(s.post("/llm/forward", {{"question", ""}})->status == 422);

  auto const b = s.post("/llm/backward", {{"polygon", {{-9, -9}, {9, -9}, {9, 9}, {-9, 9}}}, {"samples", 3}});
  REQUIRE(b);
  CHECK(b->status == 200);
  CHECK(body_of(b)["nodes"].size() == 3);
  CHECK_FALSE(body_of(b)["summary"].get<std::string>().empty());
}

TEST_CASE("LLM endpoints need county boundaries") {
  Running s("svc-nocounty", false);
  CHECK(s.post("/llm/forward", {{"question", "nodes over all above 0"}})->status == 409);
}

TEST_CASE("project save and load") {
  Running s("svc-proj");
  auto const saved = s.put("/project", {{"action", "save"}});
  REQUIRE(saved);
  CHECK(saved->status == 200);
  CHECK(fs::exists(s.fx.dir / "saved.json"));
  CHECK(s.put("/project", {{"action", "load"}, {"path", (s.fx.dir / "missing.json").string()}})->status >= 400);
  CHECK(s.put("/project", {{"action", "load"}, {"path", (s.fx.dir / "saved.json").string()}})->status == 200);
  CHECK(s.put("/project", {{"action", "bogus"}})->status == 422);
  CHECK(body_of(s.http->Get("/project"))["version"] == kProjectVersion);
  CHECK(s.http->Get("/health")->status == 200);
}
