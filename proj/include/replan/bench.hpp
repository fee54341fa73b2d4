#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "replan/errors.hpp"

namespace replan {

// Fixed benchmark taxonomies.
extern const std::array<std::string_view, 7> kReferringTypes;
extern const std::array<std::string_view, 16> kTaskTypes;

bool is_referring_type(std::string_view label);
bool is_task_type(std::string_view label);

// One judged sample. Taxonomy labels may be empty for score-only fixtures.
struct ScoreRecord {
    std::string sample_id;
    double target = 0.0;      // all ratings on the 5-point scale [1,5]
    double consistency = 0.0;
    double quality = 0.0;
    double effect = 0.0;
    std::string referring_type;
    std::string task_type;
    int region_count = 1;

    void validate() const; // DomainError on out-of-range ratings or unknown labels

    bool operator==(const ScoreRecord&) const = default;
};

struct EvalConfig {
    // effect is normalized by this divisor before weighting consistency;
    // flagged in every emitted summary
    double weighted_divisor = 5.0;

    void validate() const; // DomainError unless divisor > 0
    bool operator==(const EvalConfig&) const = default;
};

/// Mean over samples of (target + consistency + quality + effect) / 4.
double overall_score(const std::vector<ScoreRecord>& records);

/// Mean over samples of (target + quality + effect + (effect/divisor) * consistency) / 4.
double weighted_score(const std::vector<ScoreRecord>& records, const EvalConfig& cfg = {});

struct BenchmarkSummary {
    std::size_t sample_count = 0;
    double overall = 0.0;
    double weighted = 0.0;
    double weighted_divisor = 5.0;
    double mean_target = 0.0;
    double mean_consistency = 0.0;
    double mean_quality = 0.0;
    double mean_effect = 0.0;
    std::map<std::string, int> referring_counts;     // labeled records only
    std::map<std::string, int> task_counts;
    std::map<std::string, double> referring_overall; // per-category overall mean
    std::map<std::string, double> task_overall;

    std::string to_json(int indent = -1) const;
};

BenchmarkSummary summarize(const std::vector<ScoreRecord>& records, const EvalConfig& cfg = {});

// Signed aggregate deltas, second run minus first.
struct RunDelta {
    std::size_t samples_a = 0;
    std::size_t samples_b = 0;
    double overall = 0.0;
    double weighted = 0.0;
    double mean_target = 0.0;
    double mean_consistency = 0.0;
    double mean_quality = 0.0;
    double mean_effect = 0.0;

    std::string to_json(int indent = -1) const;
};

RunDelta compare_runs(const BenchmarkSummary& a, const BenchmarkSummary& b);

// Instruction metadata independent of judge scores.
struct MetadataRecord {
    std::string sample_id;
    std::string instruction;
    std::string referring_type;
    std::string task_type;
    int region_count = 1;

    bool operator==(const MetadataRecord&) const = default;
};

struct DatasetStats {
    std::size_t sample_count = 0;
    double mean_word_count = 0.0;
    int min_word_count = 0;
    int max_word_count = 0;
    std::size_t multi_region_count = 0; // region_count >= 2
    std::map<std::string, int> referring_counts;
    std::map<std::string, int> task_counts;

    std::string to_json(int indent = -1) const;
};

DatasetStats dataset_stats(const std::vector<MetadataRecord>& records);

// JSONL ingestion: one object per non-blank line; FormatError names the line.
std::vector<ScoreRecord> parse_score_records(const std::string& jsonl);
std::vector<ScoreRecord> load_score_records(const std::string& path);
std::vector<MetadataRecord> parse_metadata_records(const std::string& jsonl);
std::vector<MetadataRecord> load_metadata_records(const std::string& path);

} // namespace replan
