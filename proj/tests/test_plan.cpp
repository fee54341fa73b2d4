#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "replan/plan.hpp"
#include "support/test_generators.hpp"

using namespace replan;

namespace {

std::string canonical(const std::string& think, const std::string& global, const std::string& region) {
    return "<think>" + think + "</think>\n<global>" + global + "</global>\n<region>" + region +
           "</region>\n";
}

bool has_violation(const std::vector<std::string>& violations, const std::string& needle) {
    return std::any_of(violations.begin(), violations.end(), [&](const std::string& v) {
        return v.find(needle) != std::string::npos;
    });
}

constexpr ImageSize kImage{64, 48};

} // namespace

TEST_CASE("parse_plan accepts the canonical layout and preserves bodies") {
    const std::string text =
        canonical("  raise the lantern \n twice ", " warm dusk ",
                  "[{\"bbox\":[4,8,20,24],\"hint\":\"brighten\"},"
                  "{\"bbox\":[0,0,64,48],\"hint\":\" keep the rest \"}]");
    const EditPlan plan = parse_plan(text, kImage);
    CHECK(plan.reasoning == "  raise the lantern \n twice ");
    CHECK(plan.global_hint == " warm dusk ");
    REQUIRE(plan.regions.size() == 2);
    CHECK(plan.regions[0].bbox == PixelBox{4, 8, 20, 24});
    CHECK(plan.regions[0].hint == "brighten");
    CHECK_FALSE(plan.regions[0].negative);
    CHECK(plan.regions[1].hint == " keep the rest ");
    CHECK(plan.regions[1].negative);
}

TEST_CASE("parse_plan tolerates arbitrary whitespace between blocks") {
    const std::string text = "  \n\t<think>r</think>   <global>g</global>\n\n<region>[]</region> \t ";
    const EditPlan plan = parse_plan(text, kImage);
    CHECK(plan.reasoning == "r");
    CHECK(plan.regions.empty());
}

TEST_CASE("parse_plan rejects non-positive image sizes") {
    const std::string text = canonical("r", "g", "[]");
    CHECK_THROWS_AS(parse_plan(text, {0, 48}), GeometryError);
    CHECK_THROWS_AS(parse_plan(text, {64, -1}), GeometryError);
}

TEST_CASE("tag structure violations") {
    SUBCASE("missing open tag") {
        CHECK_THROWS_WITH_AS(parse_plan("r</think>\n<global>g</global>\n<region>[]</region>\n", kImage),
                             "invalid tag structure; <think> tag missing", TagStructureError);
    }
    SUBCASE("missing close tag") {
        CHECK_THROWS_WITH_AS(parse_plan("<think>r</think>\n<global>g\n<region>[]</region>\n", kImage),
                             "invalid tag structure; </global> tag missing", TagStructureError);
    }
    SUBCASE("duplicated tag") {
        const std::string text =
            "<think>r</think><think>s</think>\n<global>g</global>\n<region>[]</region>\n";
        CHECK_THROWS_WITH_AS(parse_plan(text, kImage),
                             "invalid tag structure; <think> tag appears 2 times; "
                             "</think> tag appears 2 times",
                             TagStructureError);
    }
    SUBCASE("out of order") {
        const std::string text = "</think><think>r <global>g</global>\n<region>[]</region>\n";
        CHECK_THROWS_WITH_AS(parse_plan(text, kImage),
                             "invalid tag structure; tags out of order: "
                             "</think> does not follow <think>",
                             TagStructureError);
    }
    SUBCASE("content outside the blocks") {
        CHECK_THROWS_WITH_AS(parse_plan("x" + canonical("r", "g", "[]"), kImage),
                             "invalid tag structure; unexpected content before <think>",
                             TagStructureError);
        CHECK_THROWS_WITH_AS(parse_plan(canonical("r", "g", "[]") + "trailing", kImage),
                             "invalid tag structure; unexpected content after </region>",
                             TagStructureError);
        const std::string mid =
            "<think>r</think>oops<global>g</global>\n<region>[]</region>\n";
        CHECK_THROWS_WITH_AS(parse_plan(mid, kImage),
                             "invalid tag structure; unexpected content between </think> and <global>",
                             TagStructureError);
    }
}

TEST_CASE("region payload violations") {
    auto with_region = [](const std::string& region) { return canonical("r", "g", region); };
    CHECK_THROWS_WITH_AS(parse_plan(with_region("not json"), kImage),
                         "region block is not valid JSON", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("{\"bbox\":[0,0,1,1]}"), kImage),
                         "region payload must be a JSON list", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[42]"), kImage),
                         "region[0] is not a JSON object", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[{\"hint\":\"x\"}]"), kImage),
                         "region[0] needs a \"bbox\" list of 4 numbers", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[{\"bbox\":[0,0,1],\"hint\":\"x\"}]"), kImage),
                         "region[0] needs a \"bbox\" list of 4 numbers", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[{\"bbox\":[0,\"a\",1,1],\"hint\":\"x\"}]"), kImage),
                         "region[0] bbox entries must be numbers", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[{\"bbox\":[0,0,1,1]}]"), kImage),
                         "region[0] needs a \"hint\" string", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[{\"bbox\":[0,0,1,1],\"hint\":7}]"), kImage),
                         "region[0] needs a \"hint\" string", RegionPayloadError);
    CHECK_THROWS_WITH_AS(parse_plan(with_region("[{\"bbox\":[0,0,1,1],\"hint\":\"  \"}]"), kImage),
                         "region[0] hint is empty", RegionPayloadError);
    CHECK_THROWS_WITH_AS(
        parse_plan(with_region("[{\"bbox\":[0,0,1,1],\"hint\":\"x\"},{\"bbox\":[],\"hint\":\"y\"}]"),
                   kImage),
        "region[1] needs a \"bbox\" list of 4 numbers", RegionPayloadError);
}

TEST_CASE("bbox clamping") {
    auto one_region = [](const std::string& bbox) {
        return canonical("r", "g", "[{\"bbox\":" + bbox + ",\"hint\":\"x\"}]");
    };
    SUBCASE("coordinates clamp to the image rectangle") {
        const EditPlan plan = parse_plan(one_region("[-5,-2,500,500]"), kImage);
        CHECK(plan.regions[0].bbox == PixelBox{0, 0, 64, 48});
    }
    SUBCASE("fractional coordinates round half away from zero") {
        const EditPlan plan = parse_plan(one_region("[0.4,0.5,31.5,31.4]"), kImage);
        CHECK(plan.regions[0].bbox == PixelBox{0, 1, 32, 31});
    }
    SUBCASE("astronomical magnitudes survive the round trip through llround") {
        const EditPlan plan = parse_plan(one_region("[-1e300,0,1e300,2e9]"), kImage);
        CHECK(plan.regions[0].bbox == PixelBox{0, 0, 64, 48});
    }
    SUBCASE("degenerate after clamping") {
        CHECK_THROWS_WITH_AS(parse_plan(one_region("[10,10,10,20]"), kImage),
                             "region[0] bbox is degenerate after clamping", BboxError);
        CHECK_THROWS_WITH_AS(parse_plan(one_region("[30,5,20,25]"), kImage),
                             "region[0] bbox is degenerate after clamping", BboxError);
        // off-image box collapses onto the boundary
        CHECK_THROWS_WITH_AS(parse_plan(one_region("[100,0,200,20]"), kImage),
                             "region[0] bbox is degenerate after clamping", BboxError);
    }
}

TEST_CASE("negative hint detection") {
    CHECK(is_negative_hint("keep"));
    CHECK(is_negative_hint("Keep the sky untouched"));
    CHECK(is_negative_hint("  KEEP it"));
    CHECK(is_negative_hint("keep, unchanged"));
    CHECK_FALSE(is_negative_hint("keeper of the flame"));
    CHECK_FALSE(is_negative_hint("deep blue"));
    CHECK_FALSE(is_negative_hint(""));
    CHECK_FALSE(is_negative_hint("  "));
    CHECK_FALSE(is_negative_hint("7 keep"));
    CHECK(is_negative_hint("preserve this", "preserve"));
    CHECK_FALSE(is_negative_hint("keep this", "preserve"));

    ParseOptions opts;
    opts.negative_marker = "hold";
    const std::string text =
        canonical("r", "g", "[{\"bbox\":[0,0,8,8],\"hint\":\"Hold still\"}]");
    CHECK(parse_plan(text, kImage, opts).regions[0].negative);
    CHECK_FALSE(parse_plan(text, kImage).regions[0].negative);
}

TEST_CASE("count_words") {
    CHECK(count_words("") == 0);
    CHECK(count_words("   \t\n") == 0);
    CHECK(count_words("solo") == 1);
    CHECK(count_words("two words") == 2);
    CHECK(count_words("  padded   with\tmixed\nspace  ") == 4);
    CHECK(count_words("a,b c") == 2);
}

TEST_CASE("trim") {
    CHECK(trim("") == "");
    CHECK(trim("  \t ") == "");
    CHECK(trim(" x ") == "x");
    CHECK(trim("x") == "x");
    CHECK(trim("\n a b \r") == "a b");
}

TEST_CASE("inspect_plan grades partial structure without throwing") {
    SUBCASE("fully valid") {
        const PlanParseReport r = inspect_plan(canonical("three word think", "g", "[]"));
        CHECK(r.tag_ok);
        CHECK(r.region_json_ok);
        CHECK(r.reasoning_word_count == 3);
        CHECK(r.violations.empty());
    }
    SUBCASE("word count is available even when other tags are missing") {
        const PlanParseReport r = inspect_plan("<think>a b c d</think>");
        CHECK_FALSE(r.tag_ok);
        CHECK(r.reasoning_word_count == 4);
        CHECK(has_violation(r.violations, "<global> tag missing"));
        CHECK(has_violation(r.violations, "<region> tag missing"));
        CHECK_FALSE(r.region_json_ok);
    }
    SUBCASE("region JSON graded independently of tag order") {
        const PlanParseReport r = inspect_plan(canonical("r", "g", "[{]"));
        CHECK(r.tag_ok);
        CHECK_FALSE(r.region_json_ok);
        CHECK(has_violation(r.violations, "region block is not valid JSON"));
    }
    SUBCASE("region payload violation is reported verbatim") {
        const PlanParseReport r = inspect_plan(canonical("r", "g", "[{\"bbox\":[1],\"hint\":\"x\"}]"));
        CHECK(r.tag_ok);
        CHECK_FALSE(r.region_json_ok);
        CHECK(has_violation(r.violations, "region[0] needs a \"bbox\" list of 4 numbers"));
    }
    SUBCASE("empty input") {
        const PlanParseReport r = inspect_plan("");
        CHECK_FALSE(r.tag_ok);
        CHECK_FALSE(r.region_json_ok);
        CHECK(r.reasoning_word_count == 0);
        CHECK(has_violation(r.violations, "<think> tag missing"));
    }
}

TEST_CASE("serialize_plan emits the canonical layout verbatim") {
    EditPlan plan;
    plan.reasoning = "shift the lantern";
    plan.global_hint = "dusk";
    plan.regions.push_back({{1, 2, 3, 4}, "glow", false});
    CHECK(serialize_plan(plan) ==
          "<think>shift the lantern</think>\n"
          "<global>dusk</global>\n"
          "<region>[{\"bbox\":[1,2,3,4],\"hint\":\"glow\"}]</region>\n");

    plan.regions.clear();
    CHECK(serialize_plan(plan) ==
          "<think>shift the lantern</think>\n<global>dusk</global>\n<region>[]</region>\n");
}

TEST_CASE("plan_to_json carries the negative flag") {
    EditPlan plan;
    plan.reasoning = "r";
    plan.global_hint = "g";
    plan.regions.push_back({{0, 0, 8, 8}, "keep this", true});
    const nlohmann::json doc = nlohmann::json::parse(plan_to_json(plan));
    CHECK(doc["reasoning"] == "r");
    CHECK(doc["global_hint"] == "g");
    REQUIRE(doc["regions"].size() == 1);
    CHECK(doc["regions"][0]["bbox"] == nlohmann::json({0, 0, 8, 8}));
    CHECK(doc["regions"][0]["hint"] == "keep this");
    CHECK(doc["regions"][0]["negative"] == true);
}

TEST_CASE("serialize/parse round-trip over generated plans") {
    SplitMix64 rng(0x706c616e5f727400ULL);
    for (int iter = 0; iter < 300; ++iter) {
        const EditPlan plan = testgen::random_plan(rng, 64, 48, 4);
        const EditPlan back = parse_plan(serialize_plan(plan), kImage);
        CHECK(back == plan);
    }
}

TEST_CASE("inspect_plan survives random byte soup") {
    SplitMix64 rng(0x66757a7a00000001ULL);
    for (int iter = 0; iter < 1500; ++iter) {
        const std::string junk = testgen::random_bytes(rng, 160);
        const PlanParseReport r = inspect_plan(junk); // must not throw
        CHECK(r.reasoning_word_count >= 0);
    }
}
