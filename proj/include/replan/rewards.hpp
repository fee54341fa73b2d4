#pragma once

#include <string>
#include <vector>

#include "replan/errors.hpp"
#include "replan/plan.hpp"

namespace replan {

struct Stage1Config {
    double tag_reward_value = 1.0;
    double region_reward_value = 1.0;
    int reasoning_cap_words = 128;
    double reasoning_max_value = 1.0;

    void validate() const; // DomainError: values >= 0, cap >= 1
    static Stage1Config from_json(const std::string& text);

    bool operator==(const Stage1Config&) const = default;
};

// Judge ratings normalized to [0,1].
struct JudgeScores {
    double target = 0.0;
    double effect = 0.0;
    double consistency = 0.0;

    // 5-point ratings in [1,5] mapped by (s-1)/4
    static JudgeScores from_five_point(double target, double effect, double consistency);
    void validate() const; // DomainError outside [0,1]

    bool operator==(const JudgeScores&) const = default;
};

struct RewardBreakdown {
    // stage 1
    double r_tag = 0.0;
    double r_region = 0.0;
    double r_reasoning = 0.0;
    double r1_total = 0.0;
    // stage 2
    double r_target = 0.0;
    double r_effect = 0.0;
    double r_consistency_weighted = 0.0; // consistency * effect
    double lambda = 0.0;
    double r2_total = 0.0;

    std::string to_json(int indent = -1) const; // one JSONL record
    bool operator==(const RewardBreakdown&) const = default;
};

/// r_tag = tag value iff tags valid; r_region = region value iff the region
/// payload parses; r_reasoning grows linearly with word count and caps at
/// the configured maximum.
RewardBreakdown stage1_reward(const PlanParseReport& report, const Stage1Config& cfg = {});

/// r2_total = target + effect + consistency*effect + lambda * r1_total.
RewardBreakdown stage2_reward(const JudgeScores& scores, double r1_total, double lambda = 0.1);

/// Same, carrying the stage-1 fields through into the breakdown.
RewardBreakdown stage2_reward(const JudgeScores& scores,
                              const RewardBreakdown& stage1,
                              double lambda = 0.1);

/// Group-relative advantages: (r - mean) / (population std + 1e-8);
/// all zeros when the group is constant.
std::vector<double> group_advantages(const std::vector<double>& rewards);

} // namespace replan
