#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "replan/errors.hpp"
#include "replan/layout.hpp"

namespace replan {

enum class RuleName {
    Standard,              // five-rule mask
    CutRegionBgImage,      // patches attend patches only within a shared region (or both background)
    LatentRegionReference, // intra-modality full; image<->latent gated by a reference region
    NoTextForBackground,   // standard, minus background <-> global-text entries
};

struct RuleSet {
    RuleName name = RuleName::Standard;
    int reference_region = 1;        // used by latent_region_reference
    bool symmetric_text_image = true; // asymmetric variant is reserved, not implemented

    bool operator==(const RuleSet&) const = default;
};

/// Parses "standard", "cut_region_bg_image", "latent_region_reference",
/// "latent_region_reference:<region>", or "no_text_for_background".
/// Throws DomainError on anything else.
RuleSet parse_ruleset(std::string_view text);
std::string ruleset_name(const RuleSet& rules);

/// Half-open paint rectangle: rows [row_begin,row_end) x cols [col_begin,col_end).
struct MaskBlock {
    int row_begin = 0;
    int row_end = 0;
    int col_begin = 0;
    int col_end = 0;
    bool allow = true;

    bool operator==(const MaskBlock&) const = default;
};

struct SegmentSizes {
    int text = 0;
    int image = 0;
    int latent = 0;

    bool operator==(const SegmentSizes&) const = default;
};

/// Binary permission matrix over the token sequence.  Bits are stored packed
/// row-major, LSB-first within each byte; the paint history is kept as a block
/// list whose sequential expansion reproduces the bitmap.
class AttentionMask {
public:
    AttentionMask() = default;
    explicit AttentionMask(int size); // all-zero

    int size() const { return size_; }
    bool get(int u, int v) const;
    void set(int u, int v, bool allow); // does not update the block list
    void fill(int row_begin, int row_end, int col_begin, int col_end, bool allow);

    const std::vector<MaskBlock>& blocks() const { return blocks_; }
    const std::vector<std::uint8_t>& packed_bits() const { return bits_; }
    const std::optional<SegmentSizes>& segments() const { return segments_; }
    void set_segments(SegmentSizes s) { segments_ = s; }

    std::uint64_t count_allowed() const;
    std::uint64_t count_allowed(int row_begin, int row_end, int col_begin, int col_end) const;

    /// Canonical decomposition of the bitmap: row bands of identical rows,
    /// split into maximal all-ones column runs.
    std::vector<MaskBlock> rebuild_blocks() const;
    bool blocks_match_bitmap() const;

    /// 16-byte header (magic "RPAM", version u16 LE, flags u16 LE, size u64 LE)
    /// followed by the packed bits, padded to a byte boundary.
    std::vector<std::uint8_t> to_bytes() const;
    static AttentionMask from_bytes(const std::vector<std::uint8_t>& bytes);
    void save(const std::string& path) const;
    static AttentionMask load(const std::string& path);

    bool operator==(const AttentionMask& o) const {
        return size_ == o.size_ && bits_ == o.bits_;
    }

private:
    int size_ = 0;
    std::vector<std::uint8_t> bits_;
    std::vector<MaskBlock> blocks_;
    std::optional<SegmentSizes> segments_;
};

std::vector<std::uint8_t> expand_blocks(int size, const std::vector<MaskBlock>& blocks);

/// Per-pair oracle: evaluates the ruleset directly for one (query, key) pair.
/// Deliberately independent of the block construction in build_mask.
bool rule_predicate(const TokenLayout& layout, const RuleSet& rules, int u, int v);

/// Builds the mask with block/range fills only (never via rule_predicate).
AttentionMask build_mask(const TokenLayout& layout, const RuleSet& rules = {});

struct VerificationReport {
    bool ok = false;
    std::uint64_t checked = 0;
    std::uint64_t mismatches = 0;
    int first_u = -1; // first mismatching pair, -1/-1 if none
    int first_v = -1;
    bool first_expected = false; // predicate value at the first mismatch

    std::string to_json(int indent = -1) const;
};

/// Brute-force O(|X|^2) check of every entry against rule_predicate.
VerificationReport verify_mask(const TokenLayout& layout,
                               const AttentionMask& mask,
                               const RuleSet& rules = {});

struct MaskStats {
    int size = 0;
    std::uint64_t allowed = 0;
    double density = 0.0;
    std::size_t block_count = 0;
    bool has_quadrants = false;
    // [query segment][key segment], segments ordered text, image, latent
    std::array<std::array<std::uint64_t, 3>, 3> quadrants{};

    std::string to_json(int indent = -1) const;
};

MaskStats mask_stats(const AttentionMask& mask);

} // namespace replan
