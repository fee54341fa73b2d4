#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "replan/errors.hpp"

namespace replan {

// Pixel rectangle with exclusive bottom-right corner. Valid when
// 0 <= x1 < x2 <= width and 0 <= y1 < y2 <= height.
struct PixelBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }

    bool operator==(const PixelBox&) const = default;
};

struct RegionHint {
    PixelBox bbox;
    std::string hint;      // non-empty after whitespace trimming
    bool negative = false; // keep-unchanged hint, detected lexically

    bool operator==(const RegionHint&) const = default;
};

// Parsed planner output. regions[k-1] carries hint index k; index 0 is the
// whole-image global hint.
struct EditPlan {
    std::string reasoning;
    std::string global_hint;
    std::vector<RegionHint> regions; // source order preserved

    bool operator==(const EditPlan&) const = default;
};

// Total inspection result; feeds the stage-1 format rewards so malformed
// outputs still receive graded feedback.
struct PlanParseReport {
    bool tag_ok = false;
    bool region_json_ok = false;
    int reasoning_word_count = 0;
    std::vector<std::string> violations;
};

struct ParseOptions {
    // case-insensitive leading word that marks a keep-unchanged hint
    std::string negative_marker = "keep";
};

struct ImageSize {
    int width = 0;
    int height = 0;
};

// Strict parse of the canonical tag layout:
//   <think>...</think> <global>...</global> <region>[{"bbox":[...],"hint":"..."}]</region>
// Whitespace between blocks is ignored; block contents are preserved exactly.
// Throws TagStructureError, RegionPayloadError or BboxError.
EditPlan parse_plan(const std::string& text, ImageSize image_size, const ParseOptions& options = {});

// Never throws; reports tag validity, region-JSON validity and the think
// block's whitespace-delimited word count for any byte sequence.
PlanParseReport inspect_plan(const std::string& text);

// Canonical text emission; parse_plan(serialize_plan(p)) round-trips any plan
// whose free text contains no tag literals and whose negative flags follow
// the lexical marker rule.
std::string serialize_plan(const EditPlan& plan);

// Reporting document {reasoning, global_hint, regions[]}; not re-parsed.
std::string plan_to_json(const EditPlan& plan, int indent = -1);

int count_words(std::string_view s);

bool is_negative_hint(std::string_view hint, std::string_view marker = "keep");

std::string_view trim(std::string_view s);

} // namespace replan
