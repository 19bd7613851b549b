#include <doctest.h>

#include <algorithm>

#include "climsom/error.hpp"
#include "climsom/llm.hpp"
#include "fixtures.hpp"

using namespace climsom;

namespace {

CountyIndex toy_index() { return parse_counties(fixture::toy_counties_geojson()); }

bool contains(std::vector<std::string> const& v, std::string const& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_CASE("county name normalization") {
  CHECK(normalize_county_name("Los Angeles County, California") == "los angeles-ca");
  CHECK(normalize_county_name("Los Angeles County-CA") == "los angeles-ca");
  CHECK(normalize_county_name("  coos   County -  Oregon ") == "coos-or");
  CHECK(normalize_county_name("Orleans Parish, Louisiana") == "orleans-la");
  CHECK(normalize_county_name("Ventura") == "ventura");
}

TEST_CASE("template rendering") {
  CHECK(prompts::render("a {{ x }} b {{y}} {{ z }}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2 {{ z }}");
  CHECK(prompts::text("region_to_counties").find("{{") != std::string_view::npos);
  CHECK_FALSE(prompts::text("counties_to_regions").empty());
}

TEST_CASE("regions resolve to indexed counties and drop the rest") {
  StubLlmClient llm;
  llm.add_region("The  Coast", {"Los Angeles County, California", "Ventura County-CA",
                                "Atlantis County-CA"});
  auto const r = resolve_region("the coast", llm, toy_index());
  CHECK(r.counties == std::vector<std::string>{"Los Angeles County-CA", "Ventura County-CA"});
  CHECK(r.dropped == std::vector<std::string>{"Atlantis County-CA"});
  CHECK(r.shape.size() == 2);
  CHECK_FALSE(r.whole_domain);
}

TEST_CASE("bare county names match when unique") {
  StubLlmClient llm;
  llm.add_region("east", {"San Bernardino County"});
  CHECK(resolve_region("east", llm, toy_index()).counties ==
        std::vector<std::string>{"San Bernardino County-CA"});
}

TEST_CASE("unknown regions are invalid") {
  StubLlmClient llm;
  try {
    resolve_region("narnia", llm, toy_index());
    FAIL("expected an error");
  } catch (Error const& e) {
    CHECK(e.kind() == ErrorKind::kInvalidArgument);
  }
}

TEST_CASE("whole-domain region skips the model") {
  struct Refusing : LlmClient {
    std::string complete(LlmRequest const&) override { throw Error(ErrorKind::kUnavailable, "no"); }
  } llm;
  CHECK(resolve_region("All", llm, toy_index()).whole_domain);
}

TEST_CASE("default stub knows Southern California") {
  StubLlmClient llm;
  auto const r = resolve_region("Southern California", llm, toy_index());
  CHECK(r.counties.size() == 6);
}

TEST_CASE("forward queries parse to structured filters") {
  StubLlmClient llm;
  llm.add_region("coast", {"Los Angeles County-CA", "Ventura County-CA"});
  llm.add_region("inland", {"Riverside County-CA"});
  auto const index = toy_index();

  auto const above = parse_forward_query("nodes with precipitation over the coast above 0.5", llm, index);
  CHECK(above.kind == FilterKind::kThresholdAbove);
  CHECK(above.x == doctest::Approx(0.5));
  CHECK(contains(above.region_a.counties, "Ventura County-CA"));

  auto const below = parse_forward_query("nodes over the coast below −1", llm, index);
  CHECK(below.kind == FilterKind::kThresholdBelow);
  CHECK(below.x == doctest::Approx(-1));

  auto const between = parse_forward_query("nodes between -0.2 and 0.4 over the coast", llm, index);
  CHECK(between.kind == FilterKind::kBetween);
  CHECK(between.x == doctest::Approx(-0.2));
  CHECK(*between.y == doctest::Approx(0.4));

  auto const vs = parse_forward_query("nodes where the coast is wetter than inland", llm, index);
  CHECK(vs.kind == FilterKind::kRegionVsRegion);
  REQUIRE(vs.region_b);
  CHECK(vs.region_b->counties == std::vector<std::string>{"Riverside County-CA"});
}

TEST_CASE("malformed model output is retried once, then rejected") {
  struct Flaky : LlmClient {
    int calls = 0;
    std::string complete(LlmRequest const& r) override {
      if (r.intent == LlmIntent::kStructuredFilter) {
        ++calls;
        if (calls == 1) return "not json at all";
        return R"({"kind": "threshold_above", "region_a": "all", "x": 1})";
      }
      return "";
    }
  } flaky;
  auto const f = parse_forward_query("anything", flaky, toy_index());
  CHECK(flaky.calls == 2);
  CHECK(f.region_a.whole_domain);

  struct Broken : LlmClient {
    int calls = 0;
    std::string complete(LlmRequest const&) override {
      ++calls;
      return "{";
    }
  } broken;
  CHECK_THROWS_AS(parse_forward_query("anything", broken, toy_index()), Error);
  CHECK(broken.calls == 2);
}

TEST_CASE("backward summary reflects the dominant bucket") {
  StubLlmClient llm;
  std::vector<NodeSummaryBuckets> buckets(3);
  for (std::size_t i = 0; i < 3; ++i) {
    buckets[i].node = i;
    buckets[i].counties[kHigh] = {"Los Angeles County-CA", "Orange County-CA", "Ventura County-CA"};
    buckets[i].counties[kLow] = {"Riverside County-CA"};
  }
  auto const s = summarize_region(buckets, llm, 2);
  REQUIRE(s.phrases.size() == 3);
  CHECK(s.phrases[0][kHigh].find("Los Angeles") != std::string::npos);
  CHECK(s.phrases[0][kNeutral].empty());
  CHECK(s.summary.find("high") != std::string::npos);
  std::size_t words = 0;
  bool in_word = false;
  for (char c : s.summary) {
    bool const sp = std::isspace(static_cast<unsigned char>(c));
    if (!sp && !in_word) ++words;
    in_word = !sp;
  }
  CHECK(words <= 80);
}

TEST_CASE("unreachable endpoint reports kUnavailable") {
  LlmSettings s;
  s.base_url = "http://127.0.0.1:9";
  s.api_key = "x";
  s.timeout_seconds = 2;
  HttpLlmClient client(s);
  try {
    client.complete({LlmIntent::kRegionToCounties, "hi", {}});
    FAIL("expected an error");
  } catch (Error const& e) {
    CHECK(e.kind() == ErrorKind::kUnavailable);
  }
  CHECK(make_llm_client(s, true)->offline());
  CHECK_FALSE(make_llm_client(s, false)->offline());
}
