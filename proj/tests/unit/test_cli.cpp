#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "climsom/codec.hpp"
#include "fixtures.hpp"

using namespace climsom;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "climsom");
  std::ostringstream out, err;
  int const status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

struct Workspace {
  fs::path dir = fixture::scratch_dir("cli");
  std::string data = (dir / "data").string();

  Workspace() {
    auto const r = run({"generate", "--out", data, "--years", "1", "--seed", "2"});
    REQUIRE(r.status == 0);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(std::string const& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("generate writes a dataset and counties") {
  Workspace w;
  CHECK(fs::exists(fs::path(w.data) / "counties.geojson"));
  auto const data = load_ensemble(w.data);
  CHECK(data.members.size() == 6);
  CHECK(data.time_len() == 12);
}

TEST_CASE("train echoes the default configuration") {
  Workspace w;
  auto const r = run({"train", "--data", w.data, "--iters", "200", "--out", w.path("a.som")});
  REQUIRE(r.status == 0);
  auto const report = json::parse(r.out);
  CHECK(report["config"]["rows"] == 30);
  CHECK(report["config"]["cols"] == 30);
  CHECK(report["config"]["kR"].get<double>() == doctest::Approx(0.03));
  CHECK(report["config"]["kS"].get<double>() == doctest::Approx(0.2));
  CHECK(report["samples"] == 72);
  CHECK(fs::exists(w.path("a.som.metrics.json")));
  CHECK(load_checkpoint(w.path("a.som")).num_nodes() == 900);
}

TEST_CASE("same seed gives identical checkpoints") {
  Workspace w;
  for (std::string name : {"a.som", "b.som"}) {
    REQUIRE(run({"train", "--data", w.data, "--rows", "5", "--cols", "5", "--iters", "300",
                 "--seed", "9", "--out", w.path(name)})
                .status == 0);
  }
  CHECK(codec::read_file(w.path("a.som")) == codec::read_file(w.path("b.som")));
}

TEST_CASE("invalid kS is rejected with an error envelope") {
  Workspace w;
  auto const r = run({"train", "--data", w.data, "--kS", "1.5", "--out", w.path("x.som")});
  CHECK(r.status == 1);
  auto const e = json::parse(r.err);
  CHECK(e["code"] == "invalid_argument");
  CHECK_FALSE(fs::exists(w.path("x.som")));
}

TEST_CASE("sweep writes one row per grid point") {
  Workspace w;
  auto const r = run({"sweep", "--data", w.data, "--kR-list", "0.1,0.03", "--kS-list", "0.2,0.5",
                      "--rows", "4", "--cols", "4", "--iters", "200", "--jobs", "2"});
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "kR,kS,explained_variance,mean_smoothness,quantization_error,topographic_error");
  CHECK(rows[1].rfind("0.03,0.2,", 0) == 0);
  CHECK(rows[4].rfind("0.1,0.5,", 0) == 0);

  auto const file = run({"sweep", "--data", w.data, "--kR-list", "0.1,0.03", "--kS-list",
                         "0.2,0.5", "--rows", "4", "--cols", "4", "--iters", "200", "--out",
                         w.path("s.csv")});
  REQUIRE(file.status == 0);
  CHECK(codec::read_file(w.path("s.csv")) == r.out);
}

TEST_CASE("analyze reads a trained project") {
  Workspace w;
  REQUIRE(run({"train", "--data", w.data, "--rows", "5", "--cols", "5", "--iters", "300", "--out",
               w.path("p.som"), "--project", w.path("p.json")})
              .status == 0);
  auto const r = run({"analyze", "distribution", "--project", w.path("p.json"), "--members",
                      "GCM-A:historical:r1i1p1f1", "--months", "1-6", "--grid-res", "16"});
  REQUIRE(r.status == 0);
  auto const j = json::parse(r.out);
  CHECK(j.contains("kde"));
  CHECK(j.dump().find("breakdown") != std::string::npos);
}

TEST_CASE("missing inputs are reported") {
  Workspace w;
  auto const r = run({"analyze", "distribution", "--project", w.path("nope.json"), "--members", "x"});
  CHECK(r.status == 1);
  CHECK_FALSE(json::parse(r.err)["message"].get<std::string>().empty());
  CHECK(run({}).status != 0);
  CHECK(run({"train"}).status == 2);
}
