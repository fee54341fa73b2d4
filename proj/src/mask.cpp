#include "replan/mask.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace replan {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'R', 'P', 'A', 'M'};
constexpr std::uint16_t kVersion = 1;
constexpr int kMaxFileTokens = 1 << 20;

std::uint64_t packed_byte_count(int size) {
    const std::uint64_t bits = static_cast<std::uint64_t>(size) * static_cast<std::uint64_t>(size);
    return (bits + 7) / 8;
}

// byte with bits [a, b] set, 0 <= a <= b <= 7, LSB-first
std::uint8_t byte_mask(int a, int b) {
    return static_cast<std::uint8_t>((0xFFu << a) & (0xFFu >> (7 - b)));
}

void fill_bits(std::vector<std::uint8_t>& bits, std::uint64_t begin, std::uint64_t end, bool allow) {
    if (begin >= end) return;
    const std::uint64_t first = begin / 8;
    const std::uint64_t last = (end - 1) / 8;
    const int a = static_cast<int>(begin % 8);
    const int b = static_cast<int>((end - 1) % 8);
    if (first == last) {
        const std::uint8_t m = byte_mask(a, b);
        if (allow) {
            bits[first] |= m;
        } else {
            bits[first] &= static_cast<std::uint8_t>(~m);
        }
        return;
    }
    const std::uint8_t head = byte_mask(a, 7);
    const std::uint8_t tail = byte_mask(0, b);
    if (allow) {
        bits[first] |= head;
        if (last > first + 1) std::memset(bits.data() + first + 1, 0xFF, last - first - 1);
        bits[last] |= tail;
    } else {
        bits[first] &= static_cast<std::uint8_t>(~head);
        if (last > first + 1) std::memset(bits.data() + first + 1, 0x00, last - first - 1);
        bits[last] &= static_cast<std::uint8_t>(~tail);
    }
}

std::uint64_t count_bits(const std::vector<std::uint8_t>& bits, std::uint64_t begin, std::uint64_t end) {
    if (begin >= end) return 0;
    const std::uint64_t first = begin / 8;
    const std::uint64_t last = (end - 1) / 8;
    const int a = static_cast<int>(begin % 8);
    const int b = static_cast<int>((end - 1) % 8);
    if (first == last) return std::popcount(static_cast<unsigned>(bits[first] & byte_mask(a, b)));
    std::uint64_t n = std::popcount(static_cast<unsigned>(bits[first] & byte_mask(a, 7)));
    for (std::uint64_t i = first + 1; i < last; ++i) {
        n += std::popcount(static_cast<unsigned>(bits[i]));
    }
    n += std::popcount(static_cast<unsigned>(bits[last] & byte_mask(0, b)));
    return n;
}

void write_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xFF);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void write_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t read_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

bool sorted_intersects(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return true;
        if (a[i] < b[j]) ++i;
        else ++j;
    }
    return false;
}

struct PatchRun {
    int begin = 0; // half-open patch-index range
    int end = 0;
};

// maximal runs of consecutive patches belonging to region k
std::vector<PatchRun> membership_runs(const TokenLayout& layout, int k) {
    std::vector<PatchRun> runs;
    const int patches = layout.geometry().patch_count();
    int p = 0;
    while (p < patches) {
        if (!layout.patch_in_region(p, k)) {
            ++p;
            continue;
        }
        int q = p + 1;
        while (q < patches && layout.patch_in_region(q, k)) ++q;
        runs.push_back({p, q});
        p = q;
    }
    return runs;
}

std::vector<PatchRun> background_runs(const TokenLayout& layout) {
    std::vector<PatchRun> runs;
    const int patches = layout.geometry().patch_count();
    int p = 0;
    while (p < patches) {
        if (!layout.is_background(p)) {
            ++p;
            continue;
        }
        int q = p + 1;
        while (q < patches && layout.is_background(q)) ++q;
        runs.push_back({p, q});
        p = q;
    }
    return runs;
}

// maximal runs of consecutive patches with identical membership sets
std::vector<PatchRun> identical_membership_runs(const TokenLayout& layout) {
    std::vector<PatchRun> runs;
    const int patches = layout.geometry().patch_count();
    int p = 0;
    while (p < patches) {
        int q = p + 1;
        while (q < patches && layout.membership(q) == layout.membership(p)) ++q;
        runs.push_back({p, q});
        p = q;
    }
    return runs;
}

void require_symmetric(const RuleSet& rules) {
    if (!rules.symmetric_text_image) {
        throw DomainError("asymmetric text-image masking is reserved and not implemented");
    }
}

} // namespace

RuleSet parse_ruleset(std::string_view text) {
    RuleSet rules;
    std::string_view base = text;
    if (const auto colon = text.find(':'); colon != std::string_view::npos) {
        base = text.substr(0, colon);
        const std::string_view arg = text.substr(colon + 1);
        if (base != "latent_region_reference") {
            throw DomainError("only latent_region_reference takes a :<region> parameter");
        }
        int value = 0;
        const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value);
        if (ec != std::errc() || ptr != arg.data() + arg.size() || value < 1) {
            throw DomainError("ruleset region parameter must be a positive integer");
        }
        rules.reference_region = value;
    }
    if (base == "standard") {
        rules.name = RuleName::Standard;
    } else if (base == "cut_region_bg_image") {
        rules.name = RuleName::CutRegionBgImage;
    } else if (base == "latent_region_reference") {
        rules.name = RuleName::LatentRegionReference;
    } else if (base == "no_text_for_background") {
        rules.name = RuleName::NoTextForBackground;
    } else {
        throw DomainError("unknown ruleset '" + std::string(text) + "'");
    }
    return rules;
}

std::string ruleset_name(const RuleSet& rules) {
    switch (rules.name) {
    case RuleName::Standard:
        return "standard";
    case RuleName::CutRegionBgImage:
        return "cut_region_bg_image";
    case RuleName::LatentRegionReference:
        return rules.reference_region == 1
                   ? "latent_region_reference"
                   : "latent_region_reference:" + std::to_string(rules.reference_region);
    case RuleName::NoTextForBackground:
        return "no_text_for_background";
    }
    throw DomainError("unknown ruleset value");
}

AttentionMask::AttentionMask(int size) : size_(size) {
    if (size < 1) throw MaskError("mask size must be positive");
    bits_.assign(packed_byte_count(size), 0);
}

bool AttentionMask::get(int u, int v) const {
    if (u < 0 || v < 0 || u >= size_ || v >= size_) throw MaskError("mask index out of range");
    const std::uint64_t idx = static_cast<std::uint64_t>(u) * size_ + v;
    return (bits_[idx / 8] >> (idx % 8)) & 1u;
}

void AttentionMask::set(int u, int v, bool allow) {
    if (u < 0 || v < 0 || u >= size_ || v >= size_) throw MaskError("mask index out of range");
    const std::uint64_t idx = static_cast<std::uint64_t>(u) * size_ + v;
    if (allow) {
        bits_[idx / 8] |= static_cast<std::uint8_t>(1u << (idx % 8));
    } else {
        bits_[idx / 8] &= static_cast<std::uint8_t>(~(1u << (idx % 8)));
    }
}

void AttentionMask::fill(int row_begin, int row_end, int col_begin, int col_end, bool allow) {
    if (row_begin < 0 || col_begin < 0 || row_begin > row_end || col_begin > col_end ||
        row_end > size_ || col_end > size_) {
        throw MaskError("fill rectangle out of range");
    }
    if (row_begin == row_end || col_begin == col_end) return;
    for (int r = row_begin; r < row_end; ++r) {
        const std::uint64_t base = static_cast<std::uint64_t>(r) * size_;
        fill_bits(bits_, base + col_begin, base + col_end, allow);
    }
    blocks_.push_back({row_begin, row_end, col_begin, col_end, allow});
}

std::uint64_t AttentionMask::count_allowed() const {
    const std::uint64_t total = static_cast<std::uint64_t>(size_) * size_;
    return count_bits(bits_, 0, total);
}

std::uint64_t AttentionMask::count_allowed(int row_begin, int row_end, int col_begin, int col_end) const {
    if (row_begin < 0 || col_begin < 0 || row_begin > row_end || col_begin > col_end ||
        row_end > size_ || col_end > size_) {
        throw MaskError("count rectangle out of range");
    }
    std::uint64_t n = 0;
    for (int r = row_begin; r < row_end; ++r) {
        const std::uint64_t base = static_cast<std::uint64_t>(r) * size_;
        n += count_bits(bits_, base + col_begin, base + col_end);
    }
    return n;
}

std::vector<MaskBlock> AttentionMask::rebuild_blocks() const {
    std::vector<MaskBlock> out;
    const auto rows_equal = [this](int r1, int r2) {
        for (int c = 0; c < size_; ++c) {
            if (get(r1, c) != get(r2, c)) return false;
        }
        return true;
    };
    int r = 0;
    while (r < size_) {
        int band_end = r + 1;
        while (band_end < size_ && rows_equal(r, band_end)) ++band_end;
        int c = 0;
        while (c < size_) {
            if (!get(r, c)) {
                ++c;
                continue;
            }
            int run_end = c + 1;
            while (run_end < size_ && get(r, run_end)) ++run_end;
            out.push_back({r, band_end, c, run_end, true});
            c = run_end;
        }
        r = band_end;
    }
    return out;
}

bool AttentionMask::blocks_match_bitmap() const {
    return expand_blocks(size_, blocks_) == bits_;
}

std::vector<std::uint8_t> AttentionMask::to_bytes() const {
    std::vector<std::uint8_t> out(16 + bits_.size());
    std::memcpy(out.data(), kMagic, 4);
    write_u16(out.data() + 4, kVersion);
    write_u16(out.data() + 6, 0); // flags, reserved
    write_u64(out.data() + 8, static_cast<std::uint64_t>(size_));
    std::memcpy(out.data() + 16, bits_.data(), bits_.size());
    return out;
}

AttentionMask AttentionMask::from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a mask file (bad magic)");
    }
    if (read_u16(bytes.data() + 4) != kVersion) throw FormatError("unsupported mask file version");
    if (read_u16(bytes.data() + 6) != 0) throw FormatError("unsupported mask file flags");
    const std::uint64_t size = read_u64(bytes.data() + 8);
    if (size < 1 || size > static_cast<std::uint64_t>(kMaxFileTokens)) {
        throw FormatError("mask size out of supported range");
    }
    AttentionMask mask(static_cast<int>(size));
    if (bytes.size() != 16 + mask.bits_.size()) {
        throw FormatError("mask file length does not match its header");
    }
    std::memcpy(mask.bits_.data(), bytes.data() + 16, mask.bits_.size());
    const std::uint64_t used = size * size;
    const std::uint64_t capacity = mask.bits_.size() * 8;
    for (std::uint64_t i = used; i < capacity; ++i) {
        if ((mask.bits_[i / 8] >> (i % 8)) & 1u) throw FormatError("mask file padding bits must be zero");
    }
    mask.blocks_ = mask.rebuild_blocks();
    return mask;
}

void AttentionMask::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const std::vector<std::uint8_t> bytes = to_bytes();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path + "'");
}

AttentionMask AttentionMask::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return from_bytes(bytes);
}

std::vector<std::uint8_t> expand_blocks(int size, const std::vector<MaskBlock>& blocks) {
    if (size < 1) throw MaskError("mask size must be positive");
    std::vector<std::uint8_t> bits(packed_byte_count(size), 0);
    for (const MaskBlock& blk : blocks) {
        if (blk.row_begin < 0 || blk.col_begin < 0 || blk.row_begin > blk.row_end ||
            blk.col_begin > blk.col_end || blk.row_end > size || blk.col_end > size) {
            throw MaskError("block out of range");
        }
        for (int r = blk.row_begin; r < blk.row_end; ++r) {
            const std::uint64_t base = static_cast<std::uint64_t>(r) * size;
            fill_bits(bits, base + blk.col_begin, base + blk.col_end, blk.allow);
        }
    }
    return bits;
}

bool rule_predicate(const TokenLayout& layout, const RuleSet& rules, int u, int v) {
    if (u < 0 || v < 0 || u >= layout.total_tokens() || v >= layout.total_tokens()) {
        throw MaskError("token index out of range");
    }
    require_symmetric(rules);
    const Segment su = layout.segment_of(u);
    const Segment sv = layout.segment_of(v);
    const bool u_text = su == Segment::Text;
    const bool v_text = sv == Segment::Text;

    if (u_text && v_text) {
        return layout.text_group_of(u) == layout.text_group_of(v);
    }
    if (u_text || v_text) {
        const int g = layout.text_group_of(u_text ? u : v);
        const int patch = layout.patch_of(u_text ? v : u);
        if (g == 0) {
            if (rules.name == RuleName::NoTextForBackground && layout.is_background(patch)) {
                return false;
            }
            return true;
        }
        return layout.patch_in_region(patch, g);
    }

    switch (rules.name) {
    case RuleName::Standard:
    case RuleName::NoTextForBackground:
        return true;
    case RuleName::CutRegionBgImage: {
        const std::vector<int>& a = layout.membership(layout.patch_of(u));
        const std::vector<int>& b = layout.membership(layout.patch_of(v));
        if (a.empty() && b.empty()) return true;
        return sorted_intersects(a, b);
    }
    case RuleName::LatentRegionReference: {
        if (su == sv) return true;
        const int image_patch = layout.patch_of(su == Segment::Image ? u : v);
        return layout.patch_in_region(image_patch, rules.reference_region);
    }
    }
    throw DomainError("unknown ruleset value");
}

AttentionMask build_mask(const TokenLayout& layout, const RuleSet& rules) {
    layout.validate();
    require_symmetric(rules);

    const int total = layout.total_tokens();
    const int img = layout.image_offset();
    const int lat = layout.latent_offset();
    const int patches = layout.geometry().patch_count();

    AttentionMask mask(total);
    mask.set_segments({layout.text_size(), patches, patches});

    // text groups are fully connected internally, isolated from each other
    for (int g = 0; g < layout.group_count(); ++g) {
        const TokenRange t = layout.text_group(g);
        mask.fill(t.begin, t.end, t.begin, t.end, true);
    }

    // the global text group talks to every patch token, both directions
    const TokenRange g0 = layout.text_group(0);
    mask.fill(img, total, g0.begin, g0.end, true);
    mask.fill(g0.begin, g0.end, img, total, true);

    // hint groups talk to their member patches (image and latent mirrors)
    for (int k = 1; k <= layout.region_count(); ++k) {
        const TokenRange tk = layout.text_group(k);
        for (const PatchRun& run : membership_runs(layout, k)) {
            for (const int offset : {img, lat}) {
                mask.fill(offset + run.begin, offset + run.end, tk.begin, tk.end, true);
                mask.fill(tk.begin, tk.end, offset + run.begin, offset + run.end, true);
            }
        }
    }

    // patch-to-patch quadrants per ruleset
    switch (rules.name) {
    case RuleName::Standard:
    case RuleName::NoTextForBackground:
        mask.fill(img, total, img, total, true);
        break;
    case RuleName::CutRegionBgImage: {
        const std::vector<PatchRun> runs = identical_membership_runs(layout);
        for (const PatchRun& ra : runs) {
            const std::vector<int>& ma = layout.membership(ra.begin);
            for (const PatchRun& rb : runs) {
                const std::vector<int>& mb = layout.membership(rb.begin);
                const bool allowed = (ma.empty() && mb.empty()) || sorted_intersects(ma, mb);
                if (!allowed) continue;
                for (const int ro : {img, lat}) {
                    for (const int co : {img, lat}) {
                        mask.fill(ro + ra.begin, ro + ra.end, co + rb.begin, co + rb.end, true);
                    }
                }
            }
        }
        break;
    }
    case RuleName::LatentRegionReference: {
        mask.fill(img, img + patches, img, img + patches, true);
        mask.fill(lat, lat + patches, lat, lat + patches, true);
        for (const PatchRun& run : membership_runs(layout, rules.reference_region)) {
            mask.fill(img + run.begin, img + run.end, lat, lat + patches, true);
            mask.fill(lat, lat + patches, img + run.begin, img + run.end, true);
        }
        break;
    }
    }

    if (rules.name == RuleName::NoTextForBackground) {
        for (const PatchRun& run : background_runs(layout)) {
            for (const int offset : {img, lat}) {
                mask.fill(offset + run.begin, offset + run.end, g0.begin, g0.end, false);
                mask.fill(g0.begin, g0.end, offset + run.begin, offset + run.end, false);
            }
        }
    }

    return mask;
}

VerificationReport verify_mask(const TokenLayout& layout,
                               const AttentionMask& mask,
                               const RuleSet& rules) {
    if (mask.size() != layout.total_tokens()) {
        throw ShapeError("mask size does not match the layout token count");
    }
    VerificationReport report;
    const int total = mask.size();
    report.checked = static_cast<std::uint64_t>(total) * total;
    for (int u = 0; u < total; ++u) {
        for (int v = 0; v < total; ++v) {
            const bool expected = rule_predicate(layout, rules, u, v);
            if (mask.get(u, v) == expected) continue;
            if (report.mismatches == 0) {
                report.first_u = u;
                report.first_v = v;
                report.first_expected = expected;
            }
            ++report.mismatches;
        }
    }
    report.ok = report.mismatches == 0;
    return report;
}

std::string VerificationReport::to_json(int indent) const {
    json doc;
    doc["ok"] = ok;
    doc["checked"] = checked;
    doc["mismatches"] = mismatches;
    if (mismatches > 0) {
        doc["first_mismatch"] = {{"u", first_u}, {"v", first_v}, {"expected", first_expected ? 1 : 0}};
    } else {
        doc["first_mismatch"] = nullptr;
    }
    return doc.dump(indent);
}

MaskStats mask_stats(const AttentionMask& mask) {
    MaskStats stats;
    stats.size = mask.size();
    stats.allowed = mask.count_allowed();
    const double total = static_cast<double>(mask.size()) * static_cast<double>(mask.size());
    stats.density = total > 0 ? static_cast<double>(stats.allowed) / total : 0.0;
    stats.block_count = mask.blocks().size();
    if (mask.segments()) {
        const SegmentSizes seg = *mask.segments();
        if (seg.text < 0 || seg.image < 0 || seg.latent < 0 ||
            seg.text + seg.image + seg.latent != mask.size()) {
            throw ShapeError("mask segment sizes do not sum to the mask size");
        }
        const int bounds[4] = {0, seg.text, seg.text + seg.image, mask.size()};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                stats.quadrants[a][b] =
                    mask.count_allowed(bounds[a], bounds[a + 1], bounds[b], bounds[b + 1]);
            }
        }
        stats.has_quadrants = true;
    }
    return stats;
}

std::string MaskStats::to_json(int indent) const {
    json doc;
    doc["size"] = size;
    doc["allowed"] = allowed;
    doc["density"] = density;
    doc["block_count"] = block_count;
    if (has_quadrants) {
        const char* names[3] = {"text", "image", "latent"};
        json q;
        for (int a = 0; a < 3; ++a) {
            json row;
            for (int b = 0; b < 3; ++b) row[names[b]] = quadrants[a][b];
            q[names[a]] = std::move(row);
        }
        doc["quadrants"] = std::move(q);
    }
    return doc.dump(indent);
}

} // namespace replan
