#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "climsom/analysis.hpp"
#include "climsom/codec.hpp"
#include "climsom/error.hpp"
#include "climsom/json_io.hpp"
#include "climsom/project.hpp"
#include "climsom/service.hpp"
#include "climsom/som.hpp"
#include "climsom/synthetic.hpp"

namespace climsom::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shortest(double v) {
  char buf[64];
  auto const [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<double> parse_doubles(std::string const& text, char const* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    double v = 0;
    auto const [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      invalid(std::string(flag) + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) invalid(std::string(flag) + " must not be empty");
  return out;
}

void write_output(std::string const& path, std::string const& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text << "\n";
  } else {
    codec::write_file(path, text);
  }
}

// --- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string out;
  int rows = 6;
  int cols = 6;
  int years = 2;
  int archetypes = 2;
  double noise = 0.1;
  std::string gcms = "GCM-A,GCM-B,GCM-C";
  std::string ssps = "historical,ssp245";
  std::uint64_t seed = 0;
};

std::vector<std::string> split(std::string const& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Rectangular toy "counties" tiling the grid, 2x2 cells each.
json toy_counties(SyntheticRecipe const& r) {
  static constexpr std::array<char const*, 12> kNames{
      "Los Angeles", "San Diego", "Orange",   "Riverside", "San Bernardino", "Ventura",
      "Kern",        "Imperial",  "Santa Barbara", "Tulare", "Inyo",         "Fresno"};
  json features = json::array();
  int k = 0;
  for (int r0 = 0; r0 < r.rows; r0 += 2) {
    for (int c0 = 0; c0 < r.cols; c0 += 2, ++k) {
      double const x0 = r.lon0 + (c0 - 0.5) * r.step_deg;
      double const y0 = r.lat0 + (r0 - 0.5) * r.step_deg;
      double const x1 = r.lon0 + (std::min(c0 + 2, r.cols) - 0.5) * r.step_deg;
      double const y1 = r.lat0 + (std::min(r0 + 2, r.rows) - 0.5) * r.step_deg;
      std::string const name =
          k < static_cast<int>(kNames.size()) ? kNames[k] : "Tile " + std::to_string(k);
      json ring = json::array({json::array({x0, y0}), json::array({x1, y0}),
                               json::array({x1, y1}), json::array({x0, y1}),
                               json::array({x0, y0})});
      json geometry = {{"type", "Polygon"}, {"coordinates", json::array({ring})}};
      json properties = {{"name", name}, {"state", "CA"}};
      features.push_back(
          {{"type", "Feature"}, {"properties", properties}, {"geometry", geometry}});
    }
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

int cmd_generate(GenerateArgs const& a, std::ostream& out) {
  SyntheticRecipe recipe;
  recipe.rows = a.rows;
  recipe.cols = a.cols;
  recipe.years = a.years;
  recipe.archetypes = a.archetypes;
  recipe.noise = a.noise;
  auto const gcms = split(a.gcms);
  auto const ssps = split(a.ssps);
  if (gcms.empty() || ssps.empty()) invalid("--gcms and --ssps must not be empty");
  for (std::size_t g = 0; g < gcms.size(); ++g) {
    for (std::size_t s = 0; s < ssps.size(); ++s) {
      SyntheticMember m;
      m.gcm = gcms[g];
      m.ssp = ssps[s];
      m.mix.assign(a.archetypes, 0.2);
      m.mix[(g + s) % a.archetypes] = 1.0;
      m.shift = ssps[s] == "historical" ? 0.0 : 0.5 * static_cast<double>(s);
      recipe.members.push_back(m);
    }
  }
  auto const data = generate_synthetic_ensemble(recipe, a.seed);
  save_ensemble(data, a.out);
  codec::write_file(fs::path(a.out) / "counties.geojson", toy_counties(recipe).dump(2) + "\n");
  out << "wrote " << data.members.size() << " members, " << data.time_len() << " steps, "
      << data.num_cells() << " cells to " << a.out << "\n";
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  SomConfig config;
  std::string months = "all";
  std::string out;
  std::string metrics;
  std::string project;
  std::string counties;
};

int cmd_train(TrainArgs const& a, std::ostream& out) {
  a.config.validate();
  auto const months = MonthFilter::parse(a.months);
  auto state = open_project(a.data, a.counties.empty() ? std::nullopt
                                                       : std::optional<fs::path>(a.counties));
  state.config = a.config;
  state.months = months;
  auto const samples = flatten_samples(*state.dataset, months);
  auto som = train_som(samples, a.config);
  auto const metrics = som_metrics(som, samples);
  save_checkpoint(som, a.out);

  json report = {{"config", io::to_json(som.config())},
                 {"months", months.to_string()},
                 {"samples", samples.rows},
                 {"metrics", io::to_json(metrics)}};
  auto const metrics_path = a.metrics.empty() ? a.out + ".metrics.json" : a.metrics;
  codec::write_file(metrics_path, report.dump(2) + "\n");

  if (!a.project.empty()) {
    state.som = std::make_shared<SomGrid const>(std::move(som));
    state.embedding = initial_embedding(*state.som);
    save_project(state, a.project);
  }
  out << report.dump(2) << "\n";
  return 0;
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string data;
  std::string kr_list;
  std::string ks_list;
  SomConfig config;
  std::string months = "all";
  unsigned jobs = 1;
  std::string out;
};

int cmd_sweep(SweepArgs const& a, std::ostream& out) {
  auto krs = parse_doubles(a.kr_list, "--kR-list");
  auto kss = parse_doubles(a.ks_list, "--kS-list");
  std::sort(krs.begin(), krs.end());
  std::sort(kss.begin(), kss.end());
  struct Cell {
    double kr, ks;
    SomMetrics metrics;
  };
  std::vector<Cell> cells;
  for (double kr : krs) {
    for (double ks : kss) {
      auto c = a.config;
      c.kR = kr;
      c.kS = ks;
      c.validate();
      cells.push_back({kr, ks, {}});
    }
  }
  auto state = open_project(a.data);
  auto const samples = flatten_samples(*state.dataset, MonthFilter::parse(a.months));

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        auto c = a.config;
        c.kR = cells[i].kr;
        c.kS = cells[i].ks;
        cells[i].metrics = som_metrics(train_som(samples, c), samples);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::max(1u, a.jobs); ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::string csv = "kR,kS,explained_variance,mean_smoothness,quantization_error,topographic_error\n";
  for (auto const& c : cells) {
    csv += shortest(c.kr) + "," + shortest(c.ks) + "," + shortest(c.metrics.explained_variance) +
           "," + shortest(c.metrics.mean_smoothness) + "," +
           shortest(c.metrics.quantization_error) + "," + shortest(c.metrics.topographic_error) +
           "\n";
  }
  if (a.out.empty() || a.out == "-") {
    out << csv;
  } else {
    codec::write_file(a.out, csv);
  }
  return 0;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string kind;
  std::string project;
  std::string request;
  std::string members, months, target_members, target_months;
  std::string gcms, ssp;
  std::string grid_res, k, n, seed, min_cluster_size, min_samples;
  std::string out;
};

json build_request(AnalyzeArgs const& a) {
  if (!a.request.empty()) {
    try {
      return json::parse(codec::read_file(a.request));
    } catch (json::exception const& e) {
      invalid(std::string("--request is not valid JSON: ") + e.what());
    }
  }
  json req = json::object();
  auto put = [](json& j, char const* key, std::string const& v) {
    if (!v.empty()) j[key] = v;
  };
  bool const paired = a.kind == "side-by-side" || a.kind == "vector-field" ||
                      a.kind == "transitions";
  if (paired) {
    json source = json::object(), target = json::object();
    put(source, "members", a.members);
    put(source, "months", a.months);
    put(target, "members", a.target_members);
    put(target, "months", a.target_months.empty() ? a.months : a.target_months);
    req["source"] = source;
    req["target"] = target;
  } else {
    put(req, "members", a.members);
    put(req, "months", a.months);
  }
  put(req, "gcms", a.gcms);
  put(req, "ssp", a.ssp);
  put(req, "grid_res", a.grid_res);
  put(req, "k", a.k);
  put(req, "n", a.n);
  put(req, "seed", a.seed);
  put(req, "min_cluster_size", a.min_cluster_size);
  put(req, "min_samples", a.min_samples);
  return req;
}

int cmd_analyze(AnalyzeArgs const& a, std::ostream& out) {
  if (a.project.empty()) invalid("--project is required");
  if (!fs::exists(a.project)) fail(ErrorKind::kNotFound, "project file not found: " + a.project);
  auto const state = load_project(a.project);
  if (!state.som) fail(ErrorKind::kConflict, "project has no trained SOM");
  auto const body = analysis_payload(a.kind, AnalysisSnapshot::of(state), build_request(a));
  write_output(a.out, body, out);
  return 0;
}

// --- serve -----------------------------------------------------------------

struct ServeArgs {
  std::string project;
  std::string data;
  std::string counties;
  std::string host = "127.0.0.1";
  int port = 0;
  bool stub = false;
};

int cmd_serve(ServeArgs const& a, std::ostream& out) {
  ServiceOptions options;
  options.stub_llm = a.stub;
  ProjectState state;
  if (!a.project.empty() && fs::exists(a.project)) {
    state = load_project(a.project);
  } else if (!a.data.empty()) {
    state = open_project(a.data, a.counties.empty() ? std::nullopt
                                                    : std::optional<fs::path>(a.counties));
  } else {
    invalid("serve needs --project (existing) or --data");
  }
  if (!a.project.empty()) options.project_path = a.project;
  int port = a.port;
  if (port == 0) {
    if (auto const* env = std::getenv("PORT"); env && *env) {
      port = std::atoi(env);
    } else {
      port = 8080;
    }
  }
  Service service(std::move(state), std::move(options));
  out << "listening on http://" << a.host << ":" << port << std::endl;
  if (!service.listen(a.host, port)) {
    fail(ErrorKind::kUnavailable, "cannot bind " + a.host + ":" + std::to_string(port));
  }
  return 0;
}

void add_som_flags(CLI::App* cmd, SomConfig& c) {
  cmd->add_option("--rows", c.rows, "SOM rows")->capture_default_str();
  cmd->add_option("--cols", c.cols, "SOM columns")->capture_default_str();
  cmd->add_option("--iters", c.iterations, "iterations (0 = 20 x samples)")->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

}  // namespace

int run(std::vector<std::string> const& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"climsom: SOM-based analysis of climate model ensembles"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic ensemble and toy counties");
  generate->add_option("--out", gen.out, "output dataset directory")->required();
  generate->add_option("--rows", gen.rows)->capture_default_str();
  generate->add_option("--cols", gen.cols)->capture_default_str();
  generate->add_option("--years", gen.years)->capture_default_str();
  generate->add_option("--archetypes", gen.archetypes)->capture_default_str();
  generate->add_option("--noise", gen.noise)->capture_default_str();
  generate->add_option("--gcms", gen.gcms)->capture_default_str();
  generate->add_option("--ssps", gen.ssps)->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train a SOM and write a checkpoint");
  train->add_option("--data", tr.data, "dataset directory")->required();
  add_som_flags(train, tr.config);
  train->add_option("--kR", tr.config.kR, "initial neighbourhood area ratio")->capture_default_str();
  train->add_option("--kS", tr.config.kS, "final/initial sigma ratio")->capture_default_str();
  train->add_option("--months", tr.months, "month filter, e.g. 10-5")->capture_default_str();
  train->add_option("--out", tr.out, "checkpoint path")->required();
  train->add_option("--metrics", tr.metrics, "metrics JSON path (default <out>.metrics.json)");
  train->add_option("--project", tr.project, "also write a project file");
  train->add_option("--counties", tr.counties, "county GeoJSON for the project");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "train over a kR x kS grid and write CSV metrics");
  sweep->add_option("--data", sw.data, "dataset directory")->required();
  sweep->add_option("--kR-list", sw.kr_list, "comma-separated kR values")->required();
  sweep->add_option("--kS-list", sw.ks_list, "comma-separated kS values")->required();
  add_som_flags(sweep, sw.config);
  sweep->add_option("--months", sw.months)->capture_default_str();
  sweep->add_option("--jobs", sw.jobs, "parallel trainings")->capture_default_str();
  sweep->add_option("--out", sw.out, "CSV path (default stdout)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "dump an analysis payload as JSON");
  analyze->add_option("kind", an.kind, "analysis kind")
      ->required()
      ->check(CLI::IsMember(analysis_kinds()));
  analyze->add_option("--project", an.project, "project file")->required();
  analyze->add_option("--request", an.request, "raw request JSON file (overrides flags)");
  analyze->add_option("--members", an.members, "member keys gcm:ssp:variant, comma-separated");
  analyze->add_option("--months", an.months, "month filter");
  analyze->add_option("--target-members", an.target_members);
  analyze->add_option("--target-months", an.target_months);
  analyze->add_option("--gcms", an.gcms);
  analyze->add_option("--ssp", an.ssp);
  analyze->add_option("--grid-res", an.grid_res);
  analyze->add_option("--k", an.k, "bootstrap replicates");
  analyze->add_option("--n", an.n, "vector field resolution");
  analyze->add_option("--seed", an.seed);
  analyze->add_option("--min-cluster-size", an.min_cluster_size);
  analyze->add_option("--min-samples", an.min_samples);
  analyze->add_option("--out", an.out, "output path (default stdout)");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--project", sv.project, "project file (loaded if it exists)");
  serve->add_option("--data", sv.data, "dataset directory when starting fresh");
  serve->add_option("--counties", sv.counties, "county GeoJSON when starting fresh");
  serve->add_option("--host", sv.host)->capture_default_str();
  serve->add_option("--port", sv.port, "port (default $PORT or 8080)");
  serve->add_flag("--stub-llm", sv.stub, "use the offline stub LLM");

  auto report = [&](std::string const& code, std::string const& message) {
    err << json{{"code", code}, {"message", message}}.dump() << "\n";
  };

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (CLI::CallForHelp const& e) {
    out << app.help();
    return 0;
  } catch (CLI::CallForAllHelp const& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (CLI::ParseError const& e) {
    report("invalid_argument", e.what());
    return 2;
  }

  try {
    if (*generate) return cmd_generate(gen, out);
    if (*train) return cmd_train(tr, out);
    if (*sweep) return cmd_sweep(sw, out);
    if (*analyze) return cmd_analyze(an, out);
    if (*serve) return cmd_serve(sv, out);
  } catch (Error const& e) {
    report(error_code(e.kind()), e.what());
    return 1;
  } catch (std::exception const& e) {
    report("internal", e.what());
    return 1;
  }
  return 1;
}

}  // namespace climsom::cli
