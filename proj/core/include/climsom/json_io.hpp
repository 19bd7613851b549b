#pragma once

#include <json.hpp>

#include "climsom/annotate.hpp"
#include "climsom/cluster.hpp"
#include "climsom/compare.hpp"
#include "climsom/distribution.hpp"
#include "climsom/embed.hpp"
#include "climsom/som.hpp"

// Wire format shared by project files, CLI dumps and the HTTP API.
namespace climsom::io {

using nlohmann::json;

json to_json(Vec2 v);
Vec2 vec2_from_json(json const& j);
json to_json(Ring const& ring);
Ring ring_from_json(json const& j);
json to_json(Box const& box);
Box box_from_json(json const& j);

json to_json(SomConfig const& config);
SomConfig som_config_from_json(json const& j, SomConfig base = {});
json to_json(SomMetrics const& metrics);

json to_json(Annotation const& annotation);
Annotation annotation_from_json(json const& j);

json to_json(Embedding const& embedding);
Embedding embedding_from_json(json const& j);

json to_json(KdeResult const& kde);
json to_json(VectorField const& field);
json to_json(TransitionMatrix const& matrix);
json to_json(AnnotationBreakdown const& breakdown);
json to_json(MonthlyClusterTimeline const& timeline);

}  // namespace climsom::io
