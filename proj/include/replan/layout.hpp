#pragma once

#include <string>
#include <vector>

#include "replan/geometry.hpp"

namespace replan {

// half-open token index range
struct TokenRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool contains(int u) const { return u >= begin && u < end; }

    bool operator==(const TokenRange&) const = default;
};

enum class Segment { Text, Image, Latent };

// Token index universe for one plan: per-hint text groups, then image patch
// tokens, then latent patch tokens, contiguous in that order. Latent
// membership mirrors image membership patchwise, so a single membership grid
// serves both segments. Patch order is row-major.
class TokenLayout {
public:
    TokenLayout() = default;
    TokenLayout(ImageGeometry geom,
                std::vector<int> text_group_sizes,
                std::vector<std::vector<int>> patch_membership);

    const ImageGeometry& geometry() const { return geom_; }
    int grid_rows() const { return geom_.rows(); }
    int grid_cols() const { return geom_.cols(); }

    int total_tokens() const { return text_total_ + 2 * geom_.patch_count(); }
    int text_size() const { return text_total_; }
    int image_offset() const { return text_total_; }
    int latent_offset() const { return text_total_ + geom_.patch_count(); }

    int group_count() const { return static_cast<int>(text_groups_.size()); } // K+1
    int region_count() const { return group_count() - 1; }                    // K
    TokenRange text_group(int g) const { return text_groups_.at(g); }
    std::vector<int> text_group_sizes() const;

    // sorted 1-based region ids; empty set = background
    const std::vector<int>& membership(int patch) const { return membership_.at(patch); }
    bool patch_in_region(int patch, int region) const;
    bool is_background(int patch) const { return membership_[patch].empty(); }
    std::vector<int> background_patches() const;

    Segment segment_of(int u) const;
    int text_group_of(int u) const; // text tokens only
    int patch_of(int u) const;      // image/latent tokens only
    int patch_index(int i, int j) const { return i * grid_cols() + j; }

    // throws LayoutError when segments or membership are inconsistent
    void validate() const;

    std::string to_json(int indent = -1) const;
    static TokenLayout from_json(const std::string& text);

    bool operator==(const TokenLayout&) const = default;

private:
    ImageGeometry geom_;
    std::vector<TokenRange> text_groups_;
    std::vector<std::vector<int>> membership_; // rows*cols entries, row-major
    int text_total_ = 0;
};

// Text groups laid out in hint order h0..hK; patch membership from
// map_bbox_to_patches per region; overlapping boxes produce multi-membership
// sets and the background is the complement of their union.
TokenLayout build_layout(const EditPlan& plan,
                         const ImageGeometry& geom,
                         const std::vector<int>& text_group_sizes);

// Toy tokenizer stand-in: whitespace word count per hint, minimum 1.
std::vector<int> default_text_group_sizes(const EditPlan& plan);

} // namespace replan
