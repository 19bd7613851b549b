#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "climsom/annotate.hpp"
#include "climsom/counties.hpp"
#include "climsom/embed.hpp"
#include "climsom/ensemble.hpp"
#include "climsom/som.hpp"

namespace climsom {

inline constexpr int kProjectVersion = 1;

// Everything the workflow needs; immutable parts are shared so snapshots
// are cheap.
struct ProjectState {
  std::filesystem::path dataset_path;
  std::optional<std::filesystem::path> counties_path;
  MonthFilter months = MonthFilter::all();  // training months
  SomConfig config;

  std::shared_ptr<EnsembleDataset const> dataset;  // normalized
  std::shared_ptr<CountyIndex const> counties;
  std::shared_ptr<SomGrid const> som;
  std::shared_ptr<Embedding const> embedding;
  std::vector<Annotation> annotations;
  int next_annotation_id = 1;
  int next_created_order = 0;
};

// Loads (and normalizes, when needed) the dataset and the optional county
// boundaries.
ProjectState open_project(std::filesystem::path dataset_path,
                          std::optional<std::filesystem::path> counties_path = std::nullopt);

// Default embedding of a freshly trained SOM: no anchors.
std::shared_ptr<Embedding const> initial_embedding(SomGrid const& som);

// Project document; paths are written relative to `base_dir`.
std::string encode_project(ProjectState const& state, std::filesystem::path const& base_dir,
                           std::string const& checkpoint_name);

// Writes `path` and, when a SOM exists, "<stem>.som" next to it.
void save_project(ProjectState const& state, std::filesystem::path const& path);

// Throws kDataError for unknown versions or corrupt files.
ProjectState load_project(std::filesystem::path const& path);

}  // namespace climsom
