#include "climsom/project.hpp"

#include "climsom/codec.hpp"
#include "climsom/error.hpp"
#include "climsom/json_io.hpp"

namespace climsom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string relative_ref(fs::path const& target, fs::path const& base_dir) {
  auto const abs_base = fs::absolute(base_dir.empty() ? fs::path(".") : base_dir);
  return fs::absolute(target).lexically_normal().lexically_proximate(abs_base).generic_string();
}

fs::path resolve_ref(std::string const& ref, fs::path const& base_dir) {
  fs::path p(ref);
  if (p.is_relative()) p = base_dir / p;
  return p.lexically_normal();
}

}  // namespace

ProjectState open_project(fs::path dataset_path, std::optional<fs::path> counties_path) {
  ProjectState state;
  auto data = load_ensemble(dataset_path);
  if (!data.normalized) data = normalize_per_month(std::move(data));
  state.dataset = std::make_shared<EnsembleDataset const>(std::move(data));
  state.dataset_path = std::move(dataset_path);
  if (counties_path) {
    state.counties = std::make_shared<CountyIndex const>(load_counties(*counties_path));
    state.counties_path = std::move(counties_path);
  }
  return state;
}

std::shared_ptr<Embedding const> initial_embedding(SomGrid const& som) {
  return std::make_shared<Embedding const>(mde_project(build_node_graph(som), {}));
}

std::string encode_project(ProjectState const& state, fs::path const& base_dir,
                           std::string const& checkpoint_name) {
  json annotations = json::array();
  for (auto const& a : state.annotations) annotations.push_back(io::to_json(a));
  json doc = {
      {"version", kProjectVersion},
      {"dataset", relative_ref(state.dataset_path, base_dir)},
      {"counties", state.counties_path ? json(relative_ref(*state.counties_path, base_dir))
                                       : json(nullptr)},
      {"months", state.months.to_string()},
      {"config", io::to_json(state.config)},
      {"checkpoint", state.som ? json(checkpoint_name) : json(nullptr)},
      {"embedding", state.embedding ? io::to_json(*state.embedding) : json(nullptr)},
      {"annotations", annotations},
      {"next_annotation_id", state.next_annotation_id},
      {"next_created_order", state.next_created_order},
  };
  return doc.dump(2) + "\n";
}

void save_project(ProjectState const& state, fs::path const& path) {
  auto const dir = path.parent_path();
  auto const checkpoint = path.stem().string() + ".som";
  if (state.som) save_checkpoint(*state.som, dir / checkpoint);
  codec::write_file(path, encode_project(state, dir, checkpoint));
}

ProjectState load_project(fs::path const& path) {
  auto const text = codec::read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (json::exception const& e) {
    fail(ErrorKind::kDataError, std::string("corrupt project file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer()) {
    fail(ErrorKind::kDataError, "project file has no version");
  }
  if (doc["version"].get<int>() != kProjectVersion) {
    fail(ErrorKind::kDataError,
         "unsupported project version " + std::to_string(doc["version"].get<int>()));
  }
  auto const dir = path.parent_path();
  try {
    std::optional<fs::path> counties;
    if (doc.at("counties").is_string()) {
      counties = resolve_ref(doc["counties"].get<std::string>(), dir);
    }
    auto state = open_project(resolve_ref(doc.at("dataset").get<std::string>(), dir), counties);
    state.months = MonthFilter::parse(doc.at("months").get<std::string>());
    state.config = io::som_config_from_json(doc.at("config"));
    if (doc.at("checkpoint").is_string()) {
      auto som = load_checkpoint(dir / doc["checkpoint"].get<std::string>());
      if (som.dim() != state.dataset->num_cells()) {
        fail(ErrorKind::kDataError, "SOM checkpoint does not match the dataset");
      }
      state.som = std::make_shared<SomGrid const>(std::move(som));
    }
    if (!doc.at("embedding").is_null()) {
      if (!state.som) fail(ErrorKind::kDataError, "embedding without a SOM");
      auto e = io::embedding_from_json(doc["embedding"]);
      if (e.positions.size() != state.som->num_nodes()) {
        fail(ErrorKind::kDataError, "embedding does not match the SOM");
      }
      state.embedding = std::make_shared<Embedding const>(std::move(e));
    } else if (state.som) {
      state.embedding = initial_embedding(*state.som);
    }
    for (auto const& a : doc.at("annotations")) state.annotations.push_back(io::annotation_from_json(a));
    state.next_annotation_id = doc.at("next_annotation_id").get<int>();
    state.next_created_order = doc.at("next_created_order").get<int>();
    return state;
  } catch (json::exception const& e) {
    fail(ErrorKind::kDataError, std::string("corrupt project file: ") + e.what());
  } catch (Error const& e) {
    if (e.kind() == ErrorKind::kInvalidArgument) {
      fail(ErrorKind::kDataError, std::string("corrupt project file: ") + e.what());
    }
    throw;
  }
}

}  // namespace climsom
