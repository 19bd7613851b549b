#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "climsom/annotate.hpp"
#include "climsom/counties.hpp"

namespace climsom {

namespace prompts {

// Template text embedded from core/resources/prompts/<name>.txt.
std::string_view text(std::string_view name);

// Substitutes "{{ key }}" and "{{key}}" placeholders.
std::string render(std::string_view tmpl, std::map<std::string, std::string> const& vars);

}  // namespace prompts

enum class LlmIntent { kRegionToCounties, kStructuredFilter, kCountiesToRegions, kAggregateSummary };

struct LlmRequest {
  LlmIntent intent = LlmIntent::kRegionToCounties;
  std::string prompt;
  // The template variables, so offline clients can answer without parsing
  // the prompt text.
  std::map<std::string, std::string> variables;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Throws Error(kUnavailable) when the model cannot be reached.
  virtual std::string complete(LlmRequest const& request) = 0;
  virtual bool offline() const { return false; }
};

struct LlmSettings {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string api_key;
  int timeout_seconds = 60;
  int max_in_flight = 4;

  // CLIMSOM_LLM_BASE_URL, CLIMSOM_LLM_MODEL, CLIMSOM_LLM_API_KEY
  // (falls back to OPENAI_API_KEY).
  static LlmSettings from_env();
};

// Chat-completions transport.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(LlmSettings settings);
  std::string complete(LlmRequest const& request) override;

 private:
  LlmSettings settings_;
};

// Canned, network-free responses keyed by intent.
class StubLlmClient final : public LlmClient {
 public:
  StubLlmClient();

  // Region names match case-insensitively after whitespace collapsing.
  void add_region(std::string const& name, std::vector<std::string> counties);
  std::string complete(LlmRequest const& request) override;
  bool offline() const override { return true; }

 private:
  std::map<std::string, std::vector<std::string>> regions_;
};

std::unique_ptr<LlmClient> make_llm_client(LlmSettings const& settings, bool stub);

// Canonical matching form of a county name: lowercase, without "County",
// with full state names abbreviated, "name-st".
std::string normalize_county_name(std::string_view text);

// Forward step 1: named region -> counties present in the index. Unknown
// names are dropped into `dropped`; zero matches is kInvalidArgument.
// "all" (or "whole region") selects the whole domain without an LLM call.
ResolvedRegion resolve_region(std::string const& name, LlmClient& llm,
                              CountyIndex const& counties);

// Forward step 2: question -> structured filter, with regions resolved.
// Malformed model output is retried once.
StructuredFilter parse_forward_query(std::string const& question, LlmClient& llm,
                                     CountyIndex const& counties);

struct RegionSummary {
  // Per sampled node, the regional phrase for each non-empty bucket.
  std::vector<std::array<std::string, 5>> phrases;
  std::string summary;
};

// Backward direction: per-bucket phrases, then one aggregate summary
// (truncated to 80 words). Calls run with at most `max_in_flight` requests
// outstanding.
RegionSummary summarize_region(std::span<NodeSummaryBuckets const> buckets, LlmClient& llm,
                               int max_in_flight = 4);

}  // namespace climsom
