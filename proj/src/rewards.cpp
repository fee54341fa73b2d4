#include "replan/rewards.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace replan {

namespace {

using json = nlohmann::json;

double unit_checked(double s, const char* name) {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw DomainError(std::string(name) + " score must lie in [0,1]");
    }
    return s;
}

double five_point(double s, const char* name) {
    if (!(s >= 1.0 && s <= 5.0)) {
        throw DomainError(std::string(name) + " rating must lie in [1,5]");
    }
    return (s - 1.0) / 4.0;
}

} // namespace

void Stage1Config::validate() const {
    if (tag_reward_value < 0.0 || region_reward_value < 0.0 || reasoning_max_value < 0.0) {
        throw DomainError("stage-1 reward values must be >= 0");
    }
    if (reasoning_cap_words < 1) throw DomainError("reasoning word cap must be >= 1");
}

Stage1Config Stage1Config::from_json(const std::string& text) {
    json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) throw FormatError("stage-1 config is not a JSON object");
    Stage1Config cfg;
    try {
        if (doc.contains("tag_reward_value")) cfg.tag_reward_value = doc["tag_reward_value"].get<double>();
        if (doc.contains("region_reward_value")) cfg.region_reward_value = doc["region_reward_value"].get<double>();
        if (doc.contains("reasoning_cap_words")) cfg.reasoning_cap_words = doc["reasoning_cap_words"].get<int>();
        if (doc.contains("reasoning_max_value")) cfg.reasoning_max_value = doc["reasoning_max_value"].get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("stage-1 config malformed: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

JudgeScores JudgeScores::from_five_point(double target, double effect, double consistency) {
    JudgeScores s;
    s.target = five_point(target, "target");
    s.effect = five_point(effect, "effect");
    s.consistency = five_point(consistency, "consistency");
    return s;
}

void JudgeScores::validate() const {
    unit_checked(target, "target");
    unit_checked(effect, "effect");
    unit_checked(consistency, "consistency");
}

RewardBreakdown stage1_reward(const PlanParseReport& report, const Stage1Config& cfg) {
    cfg.validate();
    RewardBreakdown out;
    out.r_tag = report.tag_ok ? cfg.tag_reward_value : 0.0;
    out.r_region = report.region_json_ok ? cfg.region_reward_value : 0.0;
    const double frac = std::min(
        static_cast<double>(report.reasoning_word_count) / cfg.reasoning_cap_words, 1.0);
    out.r_reasoning = cfg.reasoning_max_value * frac;
    out.r1_total = out.r_tag + out.r_region + out.r_reasoning;
    return out;
}

RewardBreakdown stage2_reward(const JudgeScores& scores, double r1_total, double lambda) {
    if (lambda < 0.0) throw DomainError("lambda must be >= 0");
    scores.validate();
    RewardBreakdown out;
    out.r1_total = r1_total;
    out.r_target = scores.target;
    out.r_effect = scores.effect;
    out.r_consistency_weighted = scores.consistency * scores.effect;
    out.lambda = lambda;
    out.r2_total = out.r_target + out.r_effect + out.r_consistency_weighted + lambda * r1_total;
    return out;
}

RewardBreakdown stage2_reward(const JudgeScores& scores,
                              const RewardBreakdown& stage1,
                              double lambda) {
    RewardBreakdown out = stage2_reward(scores, stage1.r1_total, lambda);
    out.r_tag = stage1.r_tag;
    out.r_region = stage1.r_region;
    out.r_reasoning = stage1.r_reasoning;
    return out;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.empty()) throw EmptyInputError("advantage group must have at least one reward");
    const bool constant = std::all_of(rewards.begin(), rewards.end(),
                                      [&](double r) { return r == rewards.front(); });
    if (constant) return std::vector<double>(rewards.size(), 0.0);

    double mean = 0.0;
    for (const double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());

    double var = 0.0;
    for (const double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    const double std_pop = std::sqrt(var);
    if (std_pop == 0.0) return std::vector<double>(rewards.size(), 0.0);

    std::vector<double> advantages;
    advantages.reserve(rewards.size());
    for (const double r : rewards) advantages.push_back((r - mean) / (std_pop + 1e-8));
    return advantages;
}

std::string RewardBreakdown::to_json(int indent) const {
    json doc;
    doc["r_tag"] = r_tag;
    doc["r_region"] = r_region;
    doc["r_reasoning"] = r_reasoning;
    doc["r1_total"] = r1_total;
    doc["r_target"] = r_target;
    doc["r_effect"] = r_effect;
    doc["r_consistency_weighted"] = r_consistency_weighted;
    doc["lambda"] = lambda;
    doc["r2_total"] = r2_total;
    return doc.dump(indent);
}

} // namespace replan
