#pragma once

#include <json.hpp>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "climsom/annotate.hpp"
#include "climsom/embed.hpp"
#include "climsom/ensemble.hpp"
#include "climsom/project.hpp"
#include "climsom/som.hpp"

namespace climsom {

// Immutable view of the project used by one analysis request.
struct AnalysisSnapshot {
  std::shared_ptr<EnsembleDataset const> dataset;
  std::shared_ptr<SomGrid const> som;
  std::shared_ptr<Embedding const> embedding;
  std::vector<Annotation> annotations;

  // Throws kConflict when no SOM has been trained yet.
  static AnalysisSnapshot of(ProjectState const& state);
};

// Analysis kinds: "distribution", "side-by-side", "vector-field",
// "transitions", "timeline-runs", "timeline-forcings".
std::vector<std::string> analysis_kinds();

// Serialized response body for an analysis request. Requests accept numbers
// or numeric strings, and member lists as arrays or comma-separated strings.
std::string analysis_payload(std::string_view kind, AnalysisSnapshot const& snapshot,
                             nlohmann::json const& request);

}  // namespace climsom
