#include "replan/plan.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>

#include <json.hpp>

namespace replan {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 3> kOpenTags = {"<think>", "<global>", "<region>"};
constexpr std::array<std::string_view, 3> kCloseTags = {"</think>", "</global>", "</region>"};

std::vector<size_t> find_all(const std::string& text, std::string_view token) {
    std::vector<size_t> out;
    size_t pos = 0;
    while ((pos = text.find(token.data(), pos, token.size())) != std::string::npos) {
        out.push_back(pos);
        pos += token.size();
    }
    return out;
}

bool whitespace_only(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

struct TagScan {
    bool ok = false;
    std::vector<std::string> violations;
    // best-effort extractions, available even when the structure is broken
    std::optional<std::string> think_body;
    std::optional<std::string> global_body;
    std::optional<std::string> region_body;
};

// The grammar: each tag token appears exactly once, in canonical order, with
// only whitespace outside the three blocks. Bodies are extracted verbatim.
TagScan scan_tags(const std::string& text) {
    TagScan scan;

    std::array<std::vector<size_t>, 3> opens;
    std::array<std::vector<size_t>, 3> closes;
    for (int b = 0; b < 3; ++b) {
        opens[b] = find_all(text, kOpenTags[b]);
        closes[b] = find_all(text, kCloseTags[b]);
    }

    auto body_between = [&](int b) -> std::optional<std::string> {
        if (opens[b].empty()) return std::nullopt;
        size_t start = opens[b].front() + kOpenTags[b].size();
        for (size_t close : closes[b]) {
            if (close >= start) return text.substr(start, close - start);
        }
        return std::nullopt;
    };
    scan.think_body = body_between(0);
    scan.global_body = body_between(1);
    scan.region_body = body_between(2);

    bool counts_ok = true;
    for (int b = 0; b < 3; ++b) {
        for (auto [token, found] : {std::pair{kOpenTags[b], opens[b].size()},
                                    std::pair{kCloseTags[b], closes[b].size()}}) {
            if (found == 0) {
                scan.violations.push_back(std::string(token) + " tag missing");
                counts_ok = false;
            } else if (found > 1) {
                scan.violations.push_back(std::string(token) + " tag appears " +
                                          std::to_string(found) + " times");
                counts_ok = false;
            }
        }
    }
    if (!counts_ok) return scan;

    const size_t marks[6] = {opens[0][0], closes[0][0], opens[1][0],
                             closes[1][0], opens[2][0], closes[2][0]};
    const char* names[6] = {"<think>", "</think>", "<global>", "</global>", "<region>", "</region>"};
    for (int i = 0; i + 1 < 6; ++i) {
        if (marks[i] >= marks[i + 1]) {
            scan.violations.push_back(std::string("tags out of order: ") + names[i + 1] +
                                      " does not follow " + names[i]);
            return scan;
        }
    }

    auto gap = [&](size_t from, size_t to) { return std::string_view(text).substr(from, to - from); };
    const size_t think_end = marks[1] + kCloseTags[0].size();
    const size_t global_end = marks[3] + kCloseTags[1].size();
    const size_t region_end = marks[5] + kCloseTags[2].size();
    struct Outside {
        std::string_view chunk;
        const char* where;
    };
    const Outside outside[4] = {
        {gap(0, marks[0]), "before <think>"},
        {gap(think_end, marks[2]), "between </think> and <global>"},
        {gap(global_end, marks[4]), "between </global> and <region>"},
        {gap(region_end, text.size()), "after </region>"},
    };
    for (const auto& o : outside) {
        if (!whitespace_only(o.chunk)) {
            scan.violations.push_back(std::string("unexpected content ") + o.where);
            return scan;
        }
    }

    scan.ok = true;
    return scan;
}

struct RawRegion {
    double coords[4];
    std::string hint;
};

// Structural well-formedness of the region payload: a JSON list of objects,
// each with a 4-number "bbox" and a non-empty "hint" string. Bounds are not
// checked here (they need the image size).
std::vector<RawRegion> parse_region_objects(const std::string& body) {
    json payload = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (payload.is_discarded()) throw RegionPayloadError("region block is not valid JSON");
    if (!payload.is_array()) throw RegionPayloadError("region payload must be a JSON list");

    std::vector<RawRegion> out;
    out.reserve(payload.size());
    for (size_t idx = 0; idx < payload.size(); ++idx) {
        const json& e = payload[idx];
        const std::string at = "region[" + std::to_string(idx) + "]";
        if (!e.is_object()) throw RegionPayloadError(at + " is not a JSON object");
        if (!e.contains("bbox") || !e["bbox"].is_array() || e["bbox"].size() != 4) {
            throw RegionPayloadError(at + " needs a \"bbox\" list of 4 numbers");
        }
        RawRegion r;
        for (int c = 0; c < 4; ++c) {
            const json& v = e["bbox"][c];
            if (!v.is_number()) throw RegionPayloadError(at + " bbox entries must be numbers");
            const double d = v.get<double>();
            if (!std::isfinite(d)) throw RegionPayloadError(at + " bbox entries must be finite");
            r.coords[c] = d;
        }
        if (!e.contains("hint") || !e["hint"].is_string()) {
            throw RegionPayloadError(at + " needs a \"hint\" string");
        }
        r.hint = e["hint"].get<std::string>();
        if (trim(r.hint).empty()) throw RegionPayloadError(at + " hint is empty");
        out.push_back(std::move(r));
    }
    return out;
}

int clamp_pixel(double v, int limit) {
    // guard against out-of-range doubles before llround
    v = std::clamp(v, -1.0e9, 1.0e9);
    const long long px = std::llround(v);
    return static_cast<int>(std::clamp<long long>(px, 0, limit));
}

} // namespace

std::string_view trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

int count_words(std::string_view s) {
    int count = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

bool is_negative_hint(std::string_view hint, std::string_view marker) {
    std::string_view t = trim(hint);
    size_t n = 0;
    while (n < t.size() && std::isalpha(static_cast<unsigned char>(t[n]))) ++n;
    std::string_view word = t.substr(0, n);
    if (word.size() != marker.size()) return false;
    for (size_t i = 0; i < word.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(word[i])) !=
            std::tolower(static_cast<unsigned char>(marker[i]))) {
            return false;
        }
    }
    return true;
}

EditPlan parse_plan(const std::string& text, ImageSize image_size, const ParseOptions& options) {
    if (image_size.width <= 0 || image_size.height <= 0) {
        throw GeometryError("image size must have positive dimensions");
    }

    TagScan scan = scan_tags(text);
    if (!scan.ok) {
        std::string msg = "invalid tag structure";
        for (const auto& v : scan.violations) msg += "; " + v;
        throw TagStructureError(msg);
    }

    EditPlan plan;
    plan.reasoning = *scan.think_body;
    plan.global_hint = *scan.global_body;

    const std::vector<RawRegion> raw = parse_region_objects(*scan.region_body);
    plan.regions.reserve(raw.size());
    for (size_t idx = 0; idx < raw.size(); ++idx) {
        const RawRegion& r = raw[idx];
        RegionHint region;
        region.bbox.x1 = clamp_pixel(r.coords[0], image_size.width);
        region.bbox.y1 = clamp_pixel(r.coords[1], image_size.height);
        region.bbox.x2 = clamp_pixel(r.coords[2], image_size.width);
        region.bbox.y2 = clamp_pixel(r.coords[3], image_size.height);
        if (region.bbox.x1 >= region.bbox.x2 || region.bbox.y1 >= region.bbox.y2) {
            throw BboxError("region[" + std::to_string(idx) + "] bbox is degenerate after clamping");
        }
        region.hint = r.hint;
        region.negative = is_negative_hint(region.hint, options.negative_marker);
        plan.regions.push_back(std::move(region));
    }
    return plan;
}

PlanParseReport inspect_plan(const std::string& text) {
    try {
        PlanParseReport report;
        TagScan scan = scan_tags(text);
        report.tag_ok = scan.ok;
        report.violations = std::move(scan.violations);
        if (scan.think_body) {
            report.reasoning_word_count = count_words(*scan.think_body);
        }
        if (scan.region_body) {
            try {
                parse_region_objects(*scan.region_body);
                report.region_json_ok = true;
            } catch (const RegionPayloadError& e) {
                report.violations.push_back(e.what());
            }
        }
        return report;
    } catch (...) {
        PlanParseReport report;
        report.violations.push_back("inspection aborted by internal error");
        return report;
    }
}

std::string serialize_plan(const EditPlan& plan) {
    json regions = json::array();
    for (const RegionHint& r : plan.regions) {
        regions.push_back({{"bbox", {r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2}}, {"hint", r.hint}});
    }
    std::string out;
    out += "<think>";
    out += plan.reasoning;
    out += "</think>\n<global>";
    out += plan.global_hint;
    out += "</global>\n<region>";
    out += regions.dump();
    out += "</region>\n";
    return out;
}

std::string plan_to_json(const EditPlan& plan, int indent) {
    json regions = json::array();
    for (const RegionHint& r : plan.regions) {
        regions.push_back({{"bbox", {r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2}},
                           {"hint", r.hint},
                           {"negative", r.negative}});
    }
    json doc = {{"reasoning", plan.reasoning}, {"global_hint", plan.global_hint}, {"regions", regions}};
    return doc.dump(indent);
}

} // namespace replan
