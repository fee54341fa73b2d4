#include "replan/layout.hpp"

#include <algorithm>

#include <json.hpp>

namespace replan {

using json = nlohmann::json;

TokenLayout::TokenLayout(ImageGeometry geom,
                         std::vector<int> text_group_sizes,
                         std::vector<std::vector<int>> patch_membership)
    : geom_(geom), membership_(std::move(patch_membership)) {
    text_groups_.reserve(text_group_sizes.size());
    int cursor = 0;
    for (int size : text_group_sizes) {
        text_groups_.push_back({cursor, cursor + size});
        cursor += size;
    }
    text_total_ = cursor;
    validate();
}

std::vector<int> TokenLayout::text_group_sizes() const {
    std::vector<int> sizes;
    sizes.reserve(text_groups_.size());
    for (const TokenRange& r : text_groups_) sizes.push_back(r.size());
    return sizes;
}

bool TokenLayout::patch_in_region(int patch, int region) const {
    const std::vector<int>& m = membership_[patch];
    return std::binary_search(m.begin(), m.end(), region);
}

std::vector<int> TokenLayout::background_patches() const {
    std::vector<int> out;
    for (int p = 0; p < geom_.patch_count(); ++p) {
        if (membership_[p].empty()) out.push_back(p);
    }
    return out;
}

Segment TokenLayout::segment_of(int u) const {
    if (u < text_total_) return Segment::Text;
    if (u < latent_offset()) return Segment::Image;
    return Segment::Latent;
}

int TokenLayout::text_group_of(int u) const {
    for (int g = 0; g < group_count(); ++g) {
        if (text_groups_[g].contains(u)) return g;
    }
    throw LayoutError("token " + std::to_string(u) + " is not a text token");
}

int TokenLayout::patch_of(int u) const {
    if (u < text_total_ || u >= total_tokens()) {
        throw LayoutError("token " + std::to_string(u) + " is not a patch token");
    }
    const int rel = u - text_total_;
    return rel < geom_.patch_count() ? rel : rel - geom_.patch_count();
}

void TokenLayout::validate() const {
    if (geom_.width < 1 || geom_.height < 1 || geom_.patch_size < 1) {
        throw LayoutError("layout geometry is invalid");
    }
    if (text_groups_.empty()) throw LayoutError("layout needs at least the global text group");
    int cursor = 0;
    for (size_t g = 0; g < text_groups_.size(); ++g) {
        const TokenRange& r = text_groups_[g];
        if (r.begin != cursor || r.size() < 1) {
            throw LayoutError("text group " + std::to_string(g) + " is not contiguous or empty");
        }
        cursor = r.end;
    }
    if (cursor != text_total_) throw LayoutError("text segment size mismatch");
    if (static_cast<int>(membership_.size()) != geom_.patch_count()) {
        throw LayoutError("membership grid does not match the patch grid");
    }
    const int max_region = region_count();
    for (const std::vector<int>& m : membership_) {
        if (!std::is_sorted(m.begin(), m.end())) throw LayoutError("membership sets must be sorted");
        if (std::adjacent_find(m.begin(), m.end()) != m.end()) {
            throw LayoutError("membership sets must not repeat a region");
        }
        for (int k : m) {
            if (k < 1 || k > max_region) {
                throw LayoutError("membership region id " + std::to_string(k) + " out of range");
            }
        }
    }
}

std::string TokenLayout::to_json(int indent) const {
    json doc;
    doc["geometry"] = {{"width", geom_.width}, {"height", geom_.height}, {"patch_size", geom_.patch_size}};
    doc["grid"] = {{"rows", grid_rows()}, {"cols", grid_cols()}};
    doc["text_group_sizes"] = text_group_sizes();
    doc["offsets"] = {{"text", 0},
                      {"image", image_offset()},
                      {"latent", latent_offset()},
                      {"total", total_tokens()}};

    // per grid row: [[run_length, [region ids]], ...]
    json rows = json::array();
    for (int i = 0; i < grid_rows(); ++i) {
        json row = json::array();
        int j = 0;
        while (j < grid_cols()) {
            const std::vector<int>& m = membership_[patch_index(i, j)];
            int run = 1;
            while (j + run < grid_cols() && membership_[patch_index(i, j + run)] == m) ++run;
            row.push_back({run, m});
            j += run;
        }
        rows.push_back(std::move(row));
    }
    doc["membership_rle"] = std::move(rows);
    return doc.dump(indent);
}

TokenLayout TokenLayout::from_json(const std::string& text) {
    json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) throw FormatError("layout document is not valid JSON");
    try {
        const json& g = doc.at("geometry");
        ImageGeometry geom(g.at("width").get<int>(), g.at("height").get<int>(),
                           g.at("patch_size").get<int>());
        std::vector<int> sizes = doc.at("text_group_sizes").get<std::vector<int>>();

        std::vector<std::vector<int>> membership;
        membership.reserve(geom.patch_count());
        const json& rows = doc.at("membership_rle");
        if (static_cast<int>(rows.size()) != geom.rows()) {
            throw FormatError("membership_rle row count does not match the grid");
        }
        for (const json& row : rows) {
            int covered = 0;
            for (const json& run : row) {
                const int length = run.at(0).get<int>();
                auto ids = run.at(1).get<std::vector<int>>();
                if (length < 1) throw FormatError("membership run length must be >= 1");
                for (int r = 0; r < length; ++r) membership.push_back(ids);
                covered += length;
            }
            if (covered != geom.cols()) throw FormatError("membership_rle row does not cover the grid");
        }
        TokenLayout layout(geom, std::move(sizes), std::move(membership));

        if (doc.contains("offsets")) {
            const json& off = doc.at("offsets");
            if (off.at("total").get<int>() != layout.total_tokens() ||
                off.at("image").get<int>() != layout.image_offset() ||
                off.at("latent").get<int>() != layout.latent_offset()) {
                throw FormatError("layout offsets disagree with group sizes and grid");
            }
        }
        return layout;
    } catch (const json::exception& e) {
        throw FormatError(std::string("layout document malformed: ") + e.what());
    }
}

TokenLayout build_layout(const EditPlan& plan,
                         const ImageGeometry& geom,
                         const std::vector<int>& text_group_sizes) {
    const int k = static_cast<int>(plan.regions.size());
    if (static_cast<int>(text_group_sizes.size()) != k + 1) {
        throw LayoutError("text_group_sizes must have K+1 entries");
    }
    for (int size : text_group_sizes) {
        if (size < 1) throw LayoutError("text group sizes must be positive");
    }

    std::vector<std::vector<int>> membership(geom.patch_count());
    for (int region = 1; region <= k; ++region) {
        for (const PatchCoord& p : map_bbox_to_patches(plan.regions[region - 1].bbox, geom)) {
            membership[p.i * geom.cols() + p.j].push_back(region);
        }
    }
    // region loop runs in ascending order, so each set is already sorted
    return TokenLayout(geom, text_group_sizes, std::move(membership));
}

std::vector<int> default_text_group_sizes(const EditPlan& plan) {
    std::vector<int> sizes;
    sizes.reserve(plan.regions.size() + 1);
    sizes.push_back(std::max(1, count_words(plan.global_hint)));
    for (const RegionHint& r : plan.regions) {
        sizes.push_back(std::max(1, count_words(r.hint)));
    }
    return sizes;
}

} // namespace replan
