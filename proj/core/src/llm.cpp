#include "climsom/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <httplib.h>
#include <json.hpp>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "climsom/error.hpp"

namespace climsom {

using nlohmann::json;

namespace prompts {

std::string render(std::string_view tmpl, std::map<std::string, std::string> const& vars) {
  std::string out(tmpl);
  for (auto const& [key, value] : vars) {
    for (auto const& placeholder : {"{{ " + key + " }}", "{{" + key + "}}"}) {
      for (auto pos = out.find(placeholder); pos != std::string::npos;
           pos = out.find(placeholder, pos + value.size())) {
        out.replace(pos, placeholder.size(), value);
      }
    }
  }
  return out;
}

}  // namespace prompts

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto const b = s.find_first_not_of(" \t\r\n\"'`*");
  if (b == std::string_view::npos) return {};
  auto const e = s.find_last_not_of(" \t\r\n\"'`*.");
  return std::string(s.substr(b, e - b + 1));
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      out += c;
      space = false;
    }
  }
  return out;
}

std::string const& state_abbreviation(std::string const& name) {
  static std::map<std::string, std::string> const kStates = {
      {"alabama", "al"},        {"alaska", "ak"},         {"arizona", "az"},
      {"arkansas", "ar"},       {"california", "ca"},     {"colorado", "co"},
      {"connecticut", "ct"},    {"delaware", "de"},       {"florida", "fl"},
      {"georgia", "ga"},        {"hawaii", "hi"},         {"idaho", "id"},
      {"illinois", "il"},       {"indiana", "in"},        {"iowa", "ia"},
      {"kansas", "ks"},         {"kentucky", "ky"},       {"louisiana", "la"},
      {"maine", "me"},          {"maryland", "md"},       {"massachusetts", "ma"},
      {"michigan", "mi"},       {"minnesota", "mn"},      {"mississippi", "ms"},
      {"missouri", "mo"},       {"montana", "mt"},        {"nebraska", "ne"},
      {"nevada", "nv"},         {"new hampshire", "nh"},  {"new jersey", "nj"},
      {"new mexico", "nm"},     {"new york", "ny"},       {"north carolina", "nc"},
      {"north dakota", "nd"},   {"ohio", "oh"},           {"oklahoma", "ok"},
      {"oregon", "or"},         {"pennsylvania", "pa"},   {"rhode island", "ri"},
      {"south carolina", "sc"}, {"south dakota", "sd"},   {"tennessee", "tn"},
      {"texas", "tx"},          {"utah", "ut"},           {"vermont", "vt"},
      {"virginia", "va"},       {"washington", "wa"},     {"west virginia", "wv"},
      {"wisconsin", "wi"},      {"wyoming", "wy"}};
  auto it = kStates.find(name);
  return it == kStates.end() ? name : it->second;
}

bool looks_like_state(std::string const& token) {
  auto const t = lower(trim(token));
  return t.size() == 2 || state_abbreviation(t) != t;
}

}  // namespace

std::string normalize_county_name(std::string_view text) {
  auto s = collapse_spaces(lower(trim(text)));
  std::string name = s;
  std::string state;
  if (auto cut = s.find_last_of("-,"); cut != std::string::npos) {
    name = trim(s.substr(0, cut));
    state = trim(s.substr(cut + 1));
  }
  for (std::string_view suffix : {" county", " parish", " borough"}) {
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      name.resize(name.size() - suffix.size());
    }
  }
  if (state.empty()) return name;
  return name + "-" + state_abbreviation(state);
}

LlmSettings LlmSettings::from_env() {
  LlmSettings s;
  if (auto const* v = std::getenv("CLIMSOM_LLM_BASE_URL"); v && *v) s.base_url = v;
  if (auto const* v = std::getenv("CLIMSOM_LLM_MODEL"); v && *v) s.model = v;
  if (auto const* v = std::getenv("CLIMSOM_LLM_API_KEY"); v && *v) {
    s.api_key = v;
  } else if (auto const* k = std::getenv("OPENAI_API_KEY"); k && *k) {
    s.api_key = k;
  }
  return s;
}

HttpLlmClient::HttpLlmClient(LlmSettings settings) : settings_(std::move(settings)) {}

std::string HttpLlmClient::complete(LlmRequest const& request) {
  static std::regex const kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(settings_.base_url, m, kUrl)) {
    invalid("LLM base URL must look like http(s)://host[/path]");
  }
  std::string const host = m[1];
  std::string path = m[2].matched ? std::string(m[2]) : std::string();
  if (!path.empty() && path.back() == '/') path.pop_back();
  path += "/chat/completions";

  json body = {{"model", settings_.model},
               {"temperature", 0},
               {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})}};
  httplib::Headers headers;
  if (!settings_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + settings_.api_key);
  }
  try {
    httplib::Client cli(host);
    cli.set_connection_timeout(settings_.timeout_seconds);
    cli.set_read_timeout(settings_.timeout_seconds);
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      fail(ErrorKind::kUnavailable,
           "LLM unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      fail(ErrorKind::kUnavailable, "LLM returned HTTP " + std::to_string(res->status));
    }
    auto const reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (json::exception const& e) {
    fail(ErrorKind::kUnavailable, std::string("malformed LLM response: ") + e.what());
  } catch (std::invalid_argument const& e) {
    // httplib rejects https hosts when built without TLS support.
    fail(ErrorKind::kUnavailable, std::string("LLM transport: ") + e.what());
  }
}

namespace {

std::string region_key(std::string_view name) { return collapse_spaces(lower(trim(name))); }

std::string stub_filter(std::string question) {
  // Normalize the Unicode minus sign so numbers parse.
  for (std::string::size_type pos; (pos = question.find("\xE2\x88\x92")) != std::string::npos;) {
    question.replace(pos, 3, "-");
  }
  auto const icase = std::regex::icase | std::regex::ECMAScript;
  std::string const num = R"(([-+]?\d+(?:\.\d+)?))";
  std::string const place = R"((?:over|in|within|across|for)\s+(?:the\s+)?)";
  std::smatch m;

  auto region_of = [&](std::string const& text) -> std::string {
    static std::regex const before(
        R"((?:over|in|within|across|for)\s+(?:the\s+)?(.+?)\s+(?:is\s+|are\s+)?(?:above|below|between|greater|less|higher|lower|more|under|exceed))",
        icase);
    static std::regex const trailing(R"((?:over|in|within|across|for)\s+(?:the\s+)?(.+?)\s*[?.!]*$)",
                                     icase);
    std::smatch r;
    if (std::regex_search(text, r, before)) return trim(r[1].str());
    if (std::regex_search(text, r, trailing)) return trim(r[1].str());
    return "all";
  };

  json out;
  std::regex const between("between\\s+" + num + "\\s+and\\s+" + num, icase);
  std::regex const above(
      R"((?:above|greater than|higher than|more than|exceeds?|over|>)\s*)" + num + R"((?!\w))",
      icase);
  std::regex const below(R"((?:below|less than|lower than|under|<)\s*)" + num + R"((?!\w))", icase);
  std::regex const versus(
      std::string("(?:where|with|whose|that)?\\s*(?:the\\s+)?(?:average\\s+(?:value|precipitation)\\s+)?") +
          "(?:" + place + ")?(.+?)\\s+(?:is\\s+|are\\s+)?(higher|greater|wetter|lower|less|drier)\\s+than\\s+(?:" +
          place + ")?(.+?)\\s*[?.!]*$",
      icase);

  if (std::regex_search(question, m, between)) {
    out = {{"kind", "between"},
           {"x", std::stod(m[1])},
           {"y", std::stod(m[2])},
           {"region_a", region_of(question)},
           {"region_b", nullptr}};
  } else if (std::regex_search(question, m, above)) {
    out = {{"kind", "threshold_above"},
           {"x", std::stod(m[1])},
           {"y", nullptr},
           {"region_a", region_of(question)},
           {"region_b", nullptr}};
  } else if (std::regex_search(question, m, below)) {
    out = {{"kind", "threshold_below"},
           {"x", std::stod(m[1])},
           {"y", nullptr},
           {"region_a", region_of(question)},
           {"region_b", nullptr}};
  } else if (std::regex_search(question, m, versus)) {
    auto a = trim(m[1].str());
    auto b = trim(m[3].str());
    static std::regex const lead(R"(^.*\b(?:where|whose|with|that)\s+)", std::regex::icase);
    a = std::regex_replace(a, lead, "");
    static std::regex const avg(R"(^(?:the\s+)?(?:average\s+(?:value|precipitation)\s+)?(?:(?:over|in|within|across|for)\s+)?(?:the\s+)?)",
                                std::regex::icase);
    a = trim(std::regex_replace(a, avg, ""));
    b = trim(std::regex_replace(b, avg, ""));
    auto const kind = lower(m[2].str());
    bool const lower_than = kind == "lower" || kind == "less" || kind == "drier";
    out = {{"kind", "region_vs_region"},
           {"region_a", lower_than ? b : a},
           {"region_b", lower_than ? a : b},
           {"x", nullptr},
           {"y", nullptr}};
  } else {
    out = {{"kind", "unsupported"}};
  }
  return out.dump();
}

std::string stub_phrase(std::string const& list) {
  std::vector<std::string> names;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    auto t = trim(item);
    if (auto dash = t.find_last_of('-'); dash != std::string::npos) t = t.substr(0, dash);
    if (!t.empty()) names.push_back(t);
  }
  if (names.empty()) return "No counties.";
  std::string out;
  std::size_t const shown = std::min<std::size_t>(names.size(), 3);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i > 0) out += (i + 1 == shown && names.size() == shown) ? " and " : ", ";
    out += names[i];
  }
  if (names.size() > shown) out += " and " + std::to_string(names.size() - shown) + " more";
  return out + (names.size() == 1 ? " county." : " counties.");
}

std::string stub_summary(std::string const& counts_json) {
  static constexpr std::array<char const*, 5> kLabels{"low", "moderately low", "neutral",
                                                      "moderately high", "high"};
  auto const counts = json::parse(counts_json);
  std::vector<std::pair<long, int>> ranked;
  long total = 0;
  for (int b = 0; b < 5; ++b) {
    long const c = counts.value(kBucketKeys[b], 0L);
    total += c;
    if (c > 0) ranked.emplace_back(c, b);
  }
  if (total == 0) return "No counties were available to summarize.";
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](auto const& x, auto const& y) { return x.first > y.first; });
  if (ranked.size() == 1) {
    return std::string("Sampled nodes show ") + kLabels[ranked[0].second] +
           " precipitation across all sampled regions.";
  }
  auto pct = [&](long c) { return std::to_string((100 * c + total / 2) / total) + "%"; };
  std::string out = std::string("Sampled nodes are dominated by ") + kLabels[ranked[0].second] +
                    " precipitation (" + pct(ranked[0].first) + " of county readings)";
  for (std::size_t i = 1; i < std::min<std::size_t>(ranked.size(), 3); ++i) {
    out += std::string(i == 1 ? ", followed by " : ", then ") + kLabels[ranked[i].second] + " (" +
           pct(ranked[i].first) + ")";
  }
  return out + ".";
}

}  // namespace

StubLlmClient::StubLlmClient() {
  add_region("Southern California",
             {"Los Angeles County-CA", "San Diego County-CA", "Orange County-CA",
              "Riverside County-CA", "San Bernardino County-CA", "Ventura County-CA"});
}

void StubLlmClient::add_region(std::string const& name, std::vector<std::string> counties) {
  regions_[region_key(name)] = std::move(counties);
}

std::string StubLlmClient::complete(LlmRequest const& request) {
  auto var = [&](char const* key) {
    auto it = request.variables.find(key);
    return it == request.variables.end() ? std::string() : it->second;
  };
  switch (request.intent) {
    case LlmIntent::kRegionToCounties: {
      auto it = regions_.find(region_key(var("Region")));
      if (it == regions_.end()) return "I could not identify counties for that region.";
      std::string out;
      for (auto const& c : it->second) {
        if (!out.empty()) out += ", ";
        out += c;
      }
      return out;
    }
    case LlmIntent::kStructuredFilter:
      return stub_filter(var("question"));
    case LlmIntent::kCountiesToRegions:
      return stub_phrase(var("list_of_counties"));
    case LlmIntent::kAggregateSummary:
      return stub_summary(var("bucket_counts"));
  }
  return {};
}

std::unique_ptr<LlmClient> make_llm_client(LlmSettings const& settings, bool stub) {
  if (stub) return std::make_unique<StubLlmClient>();
  return std::make_unique<HttpLlmClient>(settings);
}

namespace {

std::vector<std::string> split_county_list(std::string const& reply) {
  std::vector<std::string> items;
  auto const open = reply.find('[');
  auto const close = reply.rfind(']');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    try {
      auto const arr = json::parse(reply.substr(open, close - open + 1));
      for (auto const& v : arr) {
        if (v.is_string()) items.push_back(v.get<std::string>());
      }
      if (!items.empty()) return items;
    } catch (json::exception const&) {
    }
  }
  static std::regex const bullet(R"(^\s*(?:[-*•]|\d+[.)])\s*)");
  std::stringstream lines(reply);
  for (std::string line; std::getline(lines, line);) {
    std::stringstream parts(line);
    for (std::string part; std::getline(parts, part, ';');) {
      std::stringstream fields(part);
      for (std::string field; std::getline(fields, field, ',');) {
        auto t = trim(std::regex_replace(field, bullet, ""));
        if (t.empty()) continue;
        // "Coos County, Oregon" splits into a name and a bare state.
        if (!items.empty() && looks_like_state(t) && items.back().find_last_of('-') ==
                                                         std::string::npos) {
          items.back() += "-" + t;
        } else {
          items.push_back(t);
        }
      }
    }
  }
  return items;
}

}  // namespace

ResolvedRegion resolve_region(std::string const& name, LlmClient& llm,
                              CountyIndex const& counties) {
  ResolvedRegion out;
  out.name = trim(name);
  auto const key = region_key(name);
  if (key == "all" || key == "whole region" || key == "entire region" || key == "everywhere") {
    out.whole_domain = true;
    return out;
  }
  std::map<std::string, std::string> by_normal;
  for (auto const& [k, shape] : counties.counties) by_normal.emplace(normalize_county_name(k), k);

  LlmRequest req{LlmIntent::kRegionToCounties,
                 prompts::render(prompts::text("region_to_counties"), {{"Region", out.name}}),
                 {{"Region", out.name}}};
  // A name without a state still matches when exactly one county carries it.
  auto by_name = [&](std::string const& normal) {
    auto found = by_normal.end();
    int hits = 0;
    for (auto it = by_normal.lower_bound(normal + "-"); it != by_normal.end(); ++it) {
      if (it->first.rfind(normal + "-", 0) != 0) break;
      if (it->first.size() - normal.size() == 3) {
        found = it;
        ++hits;
      }
    }
    return hits == 1 ? found : by_normal.end();
  };
  for (auto const& item : split_county_list(llm.complete(req))) {
    auto const normal = normalize_county_name(item);
    auto it = by_normal.find(normal);
    if (it == by_normal.end()) it = by_name(normal);
    if (it == by_normal.end()) {
      out.dropped.push_back(item);
    } else if (std::find(out.counties.begin(), out.counties.end(), it->second) ==
               out.counties.end()) {
      out.counties.push_back(it->second);
    }
  }
  if (out.counties.empty()) {
    invalid("no counties could be resolved for region '" + out.name + "'");
  }
  out.shape = counties.region(out.counties);
  return out;
}

StructuredFilter parse_forward_query(std::string const& question, LlmClient& llm,
                                     CountyIndex const& counties) {
  LlmRequest req{LlmIntent::kStructuredFilter,
                 prompts::render(prompts::text("structured_filter"), {{"question", question}}),
                 {{"question", question}}};
  json parsed;
  for (int attempt = 0;; ++attempt) {
    auto const reply = llm.complete(req);
    try {
      auto const open = reply.find('{');
      auto const close = reply.rfind('}');
      if (open == std::string::npos || close == std::string::npos || close < open) {
        throw std::invalid_argument("no JSON object");
      }
      parsed = json::parse(reply.substr(open, close - open + 1));
      parsed.at("kind").get<std::string>();
      break;
    } catch (std::exception const&) {
      if (attempt >= 1) invalid("could not parse the model's filter after one retry");
    }
  }
  auto const kind_text = parsed.at("kind").get<std::string>();
  if (kind_text == "unsupported") invalid("unsupported question shape");

  StructuredFilter filter;
  try {
    filter.kind = filter_kind_from_string(kind_text);
    auto number = [&](char const* key) -> std::optional<double> {
      if (!parsed.contains(key) || parsed[key].is_null()) return std::nullopt;
      return parsed[key].get<double>();
    };
    if (filter.kind != FilterKind::kRegionVsRegion) {
      auto x = number("x");
      if (!x) invalid("filter threshold missing");
      filter.x = *x;
    }
    filter.y = number("y");
    filter.region_a = resolve_region(parsed.value("region_a", std::string("all")), llm, counties);
    if (filter.kind == FilterKind::kRegionVsRegion) {
      if (!parsed.contains("region_b") || !parsed["region_b"].is_string()) {
        invalid("comparison filter needs a second region");
      }
      filter.region_b = resolve_region(parsed["region_b"].get<std::string>(), llm, counties);
    }
  } catch (json::exception const& e) {
    invalid(std::string("malformed filter from model: ") + e.what());
  }
  filter.validate();
  return filter;
}

RegionSummary summarize_region(std::span<NodeSummaryBuckets const> buckets, LlmClient& llm,
                               int max_in_flight) {
  if (buckets.empty()) invalid("no bucket records to summarize");
  RegionSummary out;
  out.phrases.resize(buckets.size());

  struct Task {
    std::size_t node;
    int bucket;
    LlmRequest request;
  };
  std::vector<Task> tasks;
  json counts = json::object();
  for (int b = 0; b < 5; ++b) counts[kBucketKeys[b]] = 0;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    for (int b = 0; b < 5; ++b) {
      auto const& list = buckets[i].counties[b];
      counts[kBucketKeys[b]] = counts[kBucketKeys[b]].get<long>() + static_cast<long>(list.size());
      if (list.empty()) continue;
      std::string joined;
      for (auto const& c : list) joined += (joined.empty() ? "" : ", ") + c;
      tasks.push_back({i, b,
                       {LlmIntent::kCountiesToRegions,
                        prompts::render(prompts::text("counties_to_regions"),
                                        {{"list_of_counties", joined}}),
                        {{"list_of_counties", joined}}}});
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      try {
        out.phrases[tasks[t].node][tasks[t].bucket] = trim(llm.complete(tasks[t].request));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    auto const workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, max_in_flight)),
                                                 1, std::max<std::size_t>(1, tasks.size()));
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  static constexpr std::array<char const*, 5> kFields{
      "low_precipitation", "moderate_low_precipitation", "neutral_precipitation",
      "moderate_high_precipitation", "high_precipitation"};
  std::string dictionary;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    dictionary += "node " + std::to_string(buckets[i].node) + ": ";
    for (int b = 4; b >= 0; --b) {
      dictionary += std::string(kFields[b]) + ": [" + out.phrases[i][b] + "]";
      dictionary += b > 0 ? ", " : "\n";
    }
  }
  LlmRequest req{LlmIntent::kAggregateSummary,
                 prompts::render(prompts::text("aggregate_summaries"),
                                 {{"concatenated_descriptions_dictionary", dictionary}}),
                 {{"concatenated_descriptions_dictionary", dictionary},
                  {"bucket_counts", counts.dump()}}};
  auto const text = trim(llm.complete(req));
  std::stringstream words(text);
  int n = 0;
  for (std::string w; words >> w && n < 80; ++n) {
    out.summary += (n > 0 ? " " : "") + w;
  }
  return out;
}

}  // namespace climsom
