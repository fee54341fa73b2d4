#include "replan/bench.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "replan/plan.hpp" // count_words

namespace replan {

namespace {

using json = nlohmann::json;

constexpr const char* kMetricVersion = "iv-edit-1";

double rating_checked(double s, const char* name) {
    if (!(s >= 1.0 && s <= 5.0)) {
        throw DomainError(std::string(name) + " rating must lie in [1,5]");
    }
    return s;
}

double per_sample_overall(const ScoreRecord& r) {
    return (r.target + r.consistency + r.quality + r.effect) / 4.0;
}

double per_sample_weighted(const ScoreRecord& r, double divisor) {
    return (r.target + r.quality + r.effect + (r.effect / divisor) * r.consistency) / 4.0;
}

json counts_to_json(const std::map<std::string, int>& counts) {
    json out = json::object();
    for (const auto& [label, n] : counts) out[label] = n;
    return out;
}

json means_to_json(const std::map<std::string, double>& means) {
    json out = json::object();
    for (const auto& [label, v] : means) out[label] = v;
    return out;
}

double get_number(const json& obj, const char* key, int line) {
    if (!obj.contains(key) || !obj[key].is_number()) {
        throw FormatError("line " + std::to_string(line) + ": missing numeric field '" + key + "'");
    }
    return obj[key].get<double>();
}

std::string get_string(const json& obj, const char* key, int line, bool required) {
    if (!obj.contains(key)) {
        if (required) {
            throw FormatError("line " + std::to_string(line) + ": missing field '" + key + "'");
        }
        return {};
    }
    if (!obj[key].is_string()) {
        throw FormatError("line " + std::to_string(line) + ": field '" + key + "' must be a string");
    }
    return obj[key].get<std::string>();
}

int get_region_count(const json& obj, int line) {
    if (!obj.contains("region_count")) return 1;
    if (!obj["region_count"].is_number_integer()) {
        throw FormatError("line " + std::to_string(line) + ": region_count must be an integer");
    }
    return obj["region_count"].get<int>();
}

// invokes fn(line_number, parsed_object) per non-blank line
template <typename Fn>
void for_each_jsonl(const std::string& text, Fn&& fn) {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view body = trim(line);
        if (body.empty()) continue;
        json obj = json::parse(body, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw FormatError("line " + std::to_string(number) + ": not a JSON object");
        }
        fn(number, obj);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return buf.str();
}

} // namespace

const std::array<std::string_view, 7> kReferringTypes = {
    "Visual", "Structural", "Content", "Feature", "Spatial", "Knowledge", "Understanding",
};

const std::array<std::string_view, 16> kTaskTypes = {
    "Add",
    "Delete",
    "Replacement",
    "Attribute",
    "Parts Modification",
    "State Modification",
    "Modify Human Animal",
    "Interaction",
    "Prediction",
    "Physics Reasoning",
    "Scenario Reasoning",
    "Open-Ended Reasoning",
    "Knowledge Reasoning",
    "Text Content Edit",
    "Text Style Edit",
    "Text Reasoning Edit",
};

bool is_referring_type(std::string_view label) {
    return std::find(kReferringTypes.begin(), kReferringTypes.end(), label) != kReferringTypes.end();
}

bool is_task_type(std::string_view label) {
    return std::find(kTaskTypes.begin(), kTaskTypes.end(), label) != kTaskTypes.end();
}

void ScoreRecord::validate() const {
    rating_checked(target, "target");
    rating_checked(consistency, "consistency");
    rating_checked(quality, "quality");
    rating_checked(effect, "effect");
    if (!referring_type.empty() && !is_referring_type(referring_type)) {
        throw DomainError("unknown referring type '" + referring_type + "'");
    }
    if (!task_type.empty() && !is_task_type(task_type)) {
        throw DomainError("unknown task type '" + task_type + "'");
    }
    if (region_count < 0) throw DomainError("region_count must be >= 0");
}

void EvalConfig::validate() const {
    if (!(weighted_divisor > 0.0)) throw DomainError("weighted divisor must be > 0");
}

double overall_score(const std::vector<ScoreRecord>& records) {
    if (records.empty()) throw EmptyInputError("no score records");
    double sum = 0.0;
    for (const ScoreRecord& r : records) sum += per_sample_overall(r);
    return sum / static_cast<double>(records.size());
}

double weighted_score(const std::vector<ScoreRecord>& records, const EvalConfig& cfg) {
    if (records.empty()) throw EmptyInputError("no score records");
    cfg.validate();
    double sum = 0.0;
    for (const ScoreRecord& r : records) sum += per_sample_weighted(r, cfg.weighted_divisor);
    return sum / static_cast<double>(records.size());
}

BenchmarkSummary summarize(const std::vector<ScoreRecord>& records, const EvalConfig& cfg) {
    if (records.empty()) throw EmptyInputError("no score records");
    cfg.validate();
    for (const ScoreRecord& r : records) r.validate();

    BenchmarkSummary s;
    s.sample_count = records.size();
    s.weighted_divisor = cfg.weighted_divisor;
    s.overall = overall_score(records);
    s.weighted = weighted_score(records, cfg);

    std::map<std::string, double> referring_sum;
    std::map<std::string, double> task_sum;
    for (const ScoreRecord& r : records) {
        s.mean_target += r.target;
        s.mean_consistency += r.consistency;
        s.mean_quality += r.quality;
        s.mean_effect += r.effect;
        if (!r.referring_type.empty()) {
            s.referring_counts[r.referring_type] += 1;
            referring_sum[r.referring_type] += per_sample_overall(r);
        }
        if (!r.task_type.empty()) {
            s.task_counts[r.task_type] += 1;
            task_sum[r.task_type] += per_sample_overall(r);
        }
    }
    const double n = static_cast<double>(records.size());
    s.mean_target /= n;
    s.mean_consistency /= n;
    s.mean_quality /= n;
    s.mean_effect /= n;
    for (const auto& [label, total] : referring_sum) {
        s.referring_overall[label] = total / s.referring_counts[label];
    }
    for (const auto& [label, total] : task_sum) {
        s.task_overall[label] = total / s.task_counts[label];
    }
    return s;
}

std::string BenchmarkSummary::to_json(int indent) const {
    json doc;
    doc["metric_version"] = kMetricVersion;
    doc["sample_count"] = sample_count;
    doc["overall"] = overall;
    doc["weighted"] = weighted;
    doc["weighted_divisor"] = weighted_divisor;
    doc["dimension_means"] = {{"target", mean_target},
                              {"consistency", mean_consistency},
                              {"quality", mean_quality},
                              {"effect", mean_effect}};
    doc["referring"] = {{"counts", counts_to_json(referring_counts)},
                        {"overall", means_to_json(referring_overall)}};
    doc["task"] = {{"counts", counts_to_json(task_counts)}, {"overall", means_to_json(task_overall)}};
    return doc.dump(indent);
}

RunDelta compare_runs(const BenchmarkSummary& a, const BenchmarkSummary& b) {
    RunDelta d;
    d.samples_a = a.sample_count;
    d.samples_b = b.sample_count;
    d.overall = b.overall - a.overall;
    d.weighted = b.weighted - a.weighted;
    d.mean_target = b.mean_target - a.mean_target;
    d.mean_consistency = b.mean_consistency - a.mean_consistency;
    d.mean_quality = b.mean_quality - a.mean_quality;
    d.mean_effect = b.mean_effect - a.mean_effect;
    return d;
}

std::string RunDelta::to_json(int indent) const {
    json doc;
    doc["samples_a"] = samples_a;
    doc["samples_b"] = samples_b;
    doc["overall"] = overall;
    doc["weighted"] = weighted;
    doc["dimension_means"] = {{"target", mean_target},
                              {"consistency", mean_consistency},
                              {"quality", mean_quality},
                              {"effect", mean_effect}};
    return doc.dump(indent);
}

DatasetStats dataset_stats(const std::vector<MetadataRecord>& records) {
    DatasetStats s;
    s.sample_count = records.size();
    long long word_total = 0;
    bool first = true;
    for (const MetadataRecord& r : records) {
        const int words = count_words(r.instruction);
        word_total += words;
        if (first) {
            s.min_word_count = s.max_word_count = words;
            first = false;
        } else {
            s.min_word_count = std::min(s.min_word_count, words);
            s.max_word_count = std::max(s.max_word_count, words);
        }
        if (r.region_count >= 2) ++s.multi_region_count;
        if (!r.referring_type.empty()) s.referring_counts[r.referring_type] += 1;
        if (!r.task_type.empty()) s.task_counts[r.task_type] += 1;
    }
    if (!records.empty()) {
        s.mean_word_count = static_cast<double>(word_total) / static_cast<double>(records.size());
    }
    return s;
}

std::string DatasetStats::to_json(int indent) const {
    json doc;
    doc["sample_count"] = sample_count;
    doc["word_count"] = {{"mean", mean_word_count}, {"min", min_word_count}, {"max", max_word_count}};
    doc["multi_region_count"] = multi_region_count;
    doc["referring_counts"] = counts_to_json(referring_counts);
    doc["task_counts"] = counts_to_json(task_counts);
    return doc.dump(indent);
}

std::vector<ScoreRecord> parse_score_records(const std::string& jsonl) {
    std::vector<ScoreRecord> out;
    for_each_jsonl(jsonl, [&](int line, const json& obj) {
        ScoreRecord r;
        r.sample_id = get_string(obj, "sample_id", line, /*required=*/true);
        r.target = get_number(obj, "target", line);
        r.consistency = get_number(obj, "consistency", line);
        r.quality = get_number(obj, "quality", line);
        r.effect = get_number(obj, "effect", line);
        r.referring_type = get_string(obj, "referring_type", line, /*required=*/false);
        r.task_type = get_string(obj, "task_type", line, /*required=*/false);
        r.region_count = get_region_count(obj, line);
        r.validate();
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<ScoreRecord> load_score_records(const std::string& path) {
    return parse_score_records(read_file(path));
}

std::vector<MetadataRecord> parse_metadata_records(const std::string& jsonl) {
    std::vector<MetadataRecord> out;
    for_each_jsonl(jsonl, [&](int line, const json& obj) {
        MetadataRecord r;
        r.sample_id = get_string(obj, "sample_id", line, /*required=*/true);
        r.instruction = get_string(obj, "instruction", line, /*required=*/true);
        r.referring_type = get_string(obj, "referring_type", line, /*required=*/false);
        r.task_type = get_string(obj, "task_type", line, /*required=*/false);
        r.region_count = get_region_count(obj, line);
        if (!r.referring_type.empty() && !is_referring_type(r.referring_type)) {
            throw DomainError("unknown referring type '" + r.referring_type + "'");
        }
        if (!r.task_type.empty() && !is_task_type(r.task_type)) {
            throw DomainError("unknown task type '" + r.task_type + "'");
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<MetadataRecord> load_metadata_records(const std::string& path) {
    return parse_metadata_records(read_file(path));
}

} // namespace replan
