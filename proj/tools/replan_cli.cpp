// replan: command-line front end over the plan/mask/reward/eval library.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O or format error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "replan/bench.hpp"
#include "replan/layout.hpp"
#include "replan/mask.hpp"
#include "replan/plan.hpp"
#include "replan/rewards.hpp"
#include "replan/rng.hpp"
#include "replan/toy_model.hpp"

namespace {

using json = nlohmann::json;
using namespace replan;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return buf.str();
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct Manifest {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string config_digest;
    double duration_ms = 0.0;

    json to_json() const {
        return {{"subcommand", subcommand},
                {"inputs", inputs},
                {"outputs", outputs},
                {"config_digest", config_digest},
                {"duration_ms", duration_ms}};
    }
};

class Timer {
public:
    double elapsed_ms() const {
        const auto now = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(now - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string digest_of(const json& effective_config) {
    return hex64(fnv1a64(effective_config.dump()));
}

ImageGeometry parse_geometry(const std::string& wxh, int patch_size) {
    const auto sep = wxh.find('x');
    if (sep == std::string::npos) throw FormatError("--geometry expects WxH, e.g. 256x256");
    int width = 0;
    int height = 0;
    try {
        width = std::stoi(wxh.substr(0, sep));
        height = std::stoi(wxh.substr(sep + 1));
    } catch (const std::exception&) {
        throw FormatError("--geometry expects WxH with integer sides");
    }
    return ImageGeometry(width, height, patch_size);
}

json load_config_object(const std::string& path) {
    if (path.empty()) return json::object();
    json doc = json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw FormatError("config file '" + path + "' is not a JSON object");
    }
    return doc;
}

void emit(const json& doc) { std::cout << doc.dump(2) << "\n"; }

// ---- shared option bundles -------------------------------------------------

struct PlanInput {
    std::string plan_path;
    std::string geometry;
    int patch_size = 16;
    std::vector<int> text_tokens;

    // parses the plan file and builds its layout
    std::pair<EditPlan, TokenLayout> build(std::vector<std::string>& inputs) const {
        inputs.push_back(plan_path);
        const ImageGeometry geom = parse_geometry(geometry, patch_size);
        const EditPlan plan =
            parse_plan(read_file(plan_path), ImageSize{geom.width, geom.height});
        const std::vector<int> sizes =
            text_tokens.empty() ? default_text_group_sizes(plan) : text_tokens;
        return {plan, build_layout(plan, geom, sizes)};
    }
};

// ---- subcommands -----------------------------------------------------------

int run_plan_validate(const std::string& plan_path, const std::string& config_path) {
    Timer timer;
    Manifest manifest;
    manifest.subcommand = "plan-validate";
    manifest.inputs.push_back(plan_path);
    if (!config_path.empty()) manifest.inputs.push_back(config_path);

    Stage1Config cfg;
    const json file_cfg = load_config_object(config_path);
    if (!file_cfg.empty()) cfg = Stage1Config::from_json(file_cfg.dump());

    const json effective = {{"tag_reward_value", cfg.tag_reward_value},
                            {"region_reward_value", cfg.region_reward_value},
                            {"reasoning_cap_words", cfg.reasoning_cap_words},
                            {"reasoning_max_value", cfg.reasoning_max_value}};
    manifest.config_digest = digest_of(effective);

    const std::string text = read_file(plan_path);
    const PlanParseReport report = inspect_plan(text);
    const RewardBreakdown reward = stage1_reward(report, cfg);

    json doc;
    doc["report"] = {{"tag_ok", report.tag_ok},
                     {"region_json_ok", report.region_json_ok},
                     {"reasoning_word_count", report.reasoning_word_count},
                     {"violations", report.violations}};
    doc["reward"] = json::parse(reward.to_json());
    const bool valid = report.tag_ok && report.region_json_ok;
    doc["valid"] = valid;
    manifest.duration_ms = timer.elapsed_ms();
    doc["manifest"] = manifest.to_json();
    emit(doc);
    return valid ? 0 : 1;
}

int run_mask_build(const PlanInput& input,
                   const std::string& layout_path,
                   const std::string& ruleset_text,
                   const std::string& out_path,
                   const std::string& emit_layout_path,
                   bool verify) {
    Timer timer;
    Manifest manifest;
    manifest.subcommand = "mask-build";

    const RuleSet rules = parse_ruleset(ruleset_text);
    manifest.config_digest = digest_of({{"ruleset", ruleset_name(rules)}});

    TokenLayout layout;
    if (!layout_path.empty()) {
        manifest.inputs.push_back(layout_path);
        layout = TokenLayout::from_json(read_file(layout_path));
    } else {
        layout = input.build(manifest.inputs).second;
    }

    const AttentionMask mask = build_mask(layout, rules);

    json doc;
    doc["ruleset"] = ruleset_name(rules);
    doc["layout"] = {{"total_tokens", layout.total_tokens()},
                     {"text_tokens", layout.text_size()},
                     {"patches", layout.geometry().patch_count()},
                     {"groups", layout.group_count()}};
    doc["stats"] = json::parse(mask_stats(mask).to_json());
    doc["mask_checksum"] = hex64(fnv1a64(mask.to_bytes().data(), mask.to_bytes().size()));

    bool ok = true;
    if (verify) {
        const VerificationReport report = verify_mask(layout, mask, rules);
        doc["verify"] = json::parse(report.to_json());
        ok = report.ok;
    }
    if (!out_path.empty()) {
        mask.save(out_path);
        manifest.outputs.push_back(out_path);
    }
    if (!emit_layout_path.empty()) {
        std::ofstream out(emit_layout_path, std::ios::trunc);
        if (!out) throw IoError("cannot open '" + emit_layout_path + "' for writing");
        out << layout.to_json(2) << "\n";
        manifest.outputs.push_back(emit_layout_path);
    }
    manifest.duration_ms = timer.elapsed_ms();
    doc["manifest"] = manifest.to_json();
    emit(doc);
    return ok ? 0 : 1;
}

int run_bench_score(const std::string& records_path,
                    const std::string& metadata_path,
                    const std::string& compare_path,
                    double divisor) {
    Timer timer;
    Manifest manifest;
    manifest.subcommand = "bench-score";
    manifest.inputs.push_back(records_path);

    EvalConfig cfg;
    cfg.weighted_divisor = divisor;
    manifest.config_digest = digest_of({{"weighted_divisor", cfg.weighted_divisor}});

    const std::vector<ScoreRecord> records = load_score_records(records_path);
    const BenchmarkSummary summary = summarize(records, cfg);

    json doc;
    doc["summary"] = json::parse(summary.to_json());
    if (!metadata_path.empty()) {
        manifest.inputs.push_back(metadata_path);
        const DatasetStats stats = dataset_stats(load_metadata_records(metadata_path));
        doc["dataset_stats"] = json::parse(stats.to_json());
    }
    if (!compare_path.empty()) {
        manifest.inputs.push_back(compare_path);
        const BenchmarkSummary other = summarize(load_score_records(compare_path), cfg);
        doc["compare"] = {{"records", compare_path},
                          {"delta", json::parse(compare_runs(summary, other).to_json())}};
    }
    manifest.duration_ms = timer.elapsed_ms();
    doc["manifest"] = manifest.to_json();
    emit(doc);
    return 0;
}

constexpr int kPerturbAttempts = 16;

int run_bench_perturb(const PlanInput& input,
                      const std::string& ruleset_text,
                      std::vector<double> ratios,
                      std::uint64_t seed,
                      const std::string& out_dir) {
    Timer timer;
    Manifest manifest;
    manifest.subcommand = "bench-perturb";

    const RuleSet rules = parse_ruleset(ruleset_text);
    if (ratios.empty()) ratios = {0.0, 0.1, 0.2, 0.5, 0.7};
    manifest.config_digest =
        digest_of({{"ruleset", ruleset_name(rules)}, {"ratios", ratios}, {"seed", seed}});

    const auto [plan, layout] = input.build(manifest.inputs);
    const ImageGeometry geom = layout.geometry();
    const std::vector<int> sizes = layout.text_group_sizes();

    json ratio_reports = json::array();
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
        const double ratio = ratios[ri];
        EditPlan perturbed = plan;
        json regions = json::array();
        for (std::size_t k = 0; k < plan.regions.size(); ++k) {
            const PixelBox& box = plan.regions[k].bbox;
            PixelBox moved = box;
            bool ok = false;
            int attempts = 0;
            while (attempts < kPerturbAttempts && !ok) {
                const std::uint64_t sub =
                    hash_mix(hash_mix(hash_mix(seed, ri), k), static_cast<std::uint64_t>(attempts));
                ++attempts;
                try {
                    moved = perturb_bbox(box, ratio, geom, sub);
                    ok = true;
                } catch (const DegenerateBoxError&) {
                    // retry with the next derived seed
                }
            }
            if (ok) perturbed.regions[k].bbox = moved;
            regions.push_back({{"input", {box.x1, box.y1, box.x2, box.y2}},
                               {"perturbed", {moved.x1, moved.y1, moved.x2, moved.y2}},
                               {"deltas",
                                {moved.x1 - box.x1, moved.y1 - box.y1, moved.x2 - box.x2,
                                 moved.y2 - box.y2}},
                               {"attempts", attempts},
                               {"skipped", !ok}});
        }
        const TokenLayout moved_layout = build_layout(perturbed, geom, sizes);
        const AttentionMask mask = build_mask(moved_layout, rules);
        const std::vector<std::uint8_t> bytes = mask.to_bytes();

        json entry;
        entry["ratio"] = ratio;
        entry["regions"] = std::move(regions);
        entry["mask_checksum"] = hex64(fnv1a64(bytes.data(), bytes.size()));
        if (!out_dir.empty()) {
            const std::string path =
                out_dir + "/mask_r" + std::to_string(static_cast<int>(std::llround(ratio * 100))) +
                ".rpam";
            mask.save(path);
            manifest.outputs.push_back(path);
            entry["out"] = path;
        }
        ratio_reports.push_back(std::move(entry));
    }

    json doc;
    doc["seed"] = seed;
    doc["ruleset"] = ruleset_name(rules);
    doc["ratios"] = std::move(ratio_reports);
    manifest.duration_ms = timer.elapsed_ms();
    doc["manifest"] = manifest.to_json();
    emit(doc);
    return 0;
}

int run_toy_denoise(const PlanInput& input,
                    const std::string& mask_mode,
                    int steps,
                    std::uint64_t seed,
                    const ToyModelConfig& config,
                    const std::string& out_path) {
    Timer timer;
    Manifest manifest;
    manifest.subcommand = "toy-denoise";

    manifest.config_digest = digest_of({{"mask", mask_mode},
                                        {"steps", steps},
                                        {"seed", seed},
                                        {"embed_dim", config.embed_dim},
                                        {"layers", config.layers},
                                        {"heads", config.heads},
                                        {"mlp_ratio", config.mlp_ratio},
                                        {"model_seed", config.seed}});

    const auto [plan, layout] = input.build(manifest.inputs);

    AttentionMask mask;
    if (mask_mode == "all-ones") {
        mask = AttentionMask(layout.total_tokens());
        mask.fill(0, mask.size(), 0, mask.size(), true);
    } else {
        mask = build_mask(layout, parse_ruleset(mask_mode));
    }

    const DenoiseReport report = denoise(plan, layout, mask, config, steps, seed);

    json doc;
    doc["mask"] = mask_mode;
    doc["report"] = json::parse(report.to_json());
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoError("cannot open '" + out_path + "' for writing");
        out << report.to_json(2) << "\n";
        manifest.outputs.push_back(out_path);
    }
    manifest.duration_ms = timer.elapsed_ms();
    doc["manifest"] = manifest.to_json();
    emit(doc);
    return 0;
}

int error_exit_code(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::Io:
    case ErrorKind::Format:
        return 2;
    default:
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"region-aligned editing toolkit: plans, attention masks, rewards, benchmark scores"};
    app.require_subcommand(1);

    // plan-validate
    auto* validate_cmd = app.add_subcommand("plan-validate", "inspect a plan file and report stage-1 rewards");
    std::string v_plan, v_config;
    validate_cmd->add_option("--plan", v_plan, "tagged plan text file")->required();
    validate_cmd->add_option("--config", v_config, "stage-1 reward config JSON");

    // mask-build
    auto* mask_cmd = app.add_subcommand("mask-build", "build the attention mask for a plan or layout");
    PlanInput m_input;
    std::string m_layout, m_ruleset = "standard", m_out, m_emit_layout;
    bool m_verify = false;
    mask_cmd->add_option("--plan", m_input.plan_path, "tagged plan text file");
    mask_cmd->add_option("--layout", m_layout, "layout JSON file (alternative to --plan)");
    mask_cmd->add_option("--geometry", m_input.geometry, "image size as WxH");
    mask_cmd->add_option("--patch-size", m_input.patch_size, "patch side in pixels")
        ->default_val(16);
    mask_cmd->add_option("--text-tokens", m_input.text_tokens, "per-group token counts h0..hK")
        ->delimiter(',');
    mask_cmd->add_option("--ruleset", m_ruleset, "standard | cut_region_bg_image | latent_region_reference[:k] | no_text_for_background")
        ->default_val("standard");
    mask_cmd->add_option("--out", m_out, "write the mask binary here");
    mask_cmd->add_option("--emit-layout", m_emit_layout, "write the layout JSON here");
    mask_cmd->add_flag("--verify", m_verify, "run the brute-force per-pair oracle");

    // bench-score
    auto* score_cmd = app.add_subcommand("bench-score", "aggregate judged score records");
    std::string s_records, s_metadata, s_compare, s_config;
    double s_divisor = 5.0;
    score_cmd->add_option("--records", s_records, "score records JSONL")->required();
    score_cmd->add_option("--metadata", s_metadata, "instruction metadata JSONL");
    score_cmd->add_option("--compare", s_compare, "second records file; reports deltas minus the first");
    score_cmd->add_option("--divisor", s_divisor, "effect normalization divisor in the weighted score")
        ->default_val(5.0);
    score_cmd->add_option("--config", s_config, "config JSON with weighted_divisor");

    // bench-perturb
    auto* perturb_cmd = app.add_subcommand("bench-perturb", "perturb region boxes and rebuild masks per ratio");
    PlanInput p_input;
    std::string p_ruleset = "standard", p_out_dir, p_config;
    std::vector<double> p_ratios;
    std::uint64_t p_seed = 0;
    perturb_cmd->add_option("--plan", p_input.plan_path, "tagged plan text file")->required();
    perturb_cmd->add_option("--geometry", p_input.geometry, "image size as WxH")->required();
    perturb_cmd->add_option("--patch-size", p_input.patch_size, "patch side in pixels")
        ->default_val(16);
    perturb_cmd->add_option("--text-tokens", p_input.text_tokens, "per-group token counts h0..hK")
        ->delimiter(',');
    perturb_cmd->add_option("--ruleset", p_ruleset, "mask ruleset")->default_val("standard");
    perturb_cmd->add_option("--ratios", p_ratios, "perturbation ratios (default 0,0.1,0.2,0.5,0.7)")
        ->delimiter(',');
    perturb_cmd->add_option("--ratio", p_ratios, "single perturbation ratio");
    perturb_cmd->add_option("--seed", p_seed, "base seed")->default_val(0);
    perturb_cmd->add_option("--out", p_out_dir, "directory for the per-ratio mask files");
    perturb_cmd->add_option("--config", p_config, "config JSON with ruleset/ratios/seed");

    // toy-denoise
    auto* denoise_cmd = app.add_subcommand("toy-denoise", "run the toy masked-attention denoiser");
    PlanInput d_input;
    std::string d_mask = "standard", d_out, d_config;
    int d_steps = 4;
    std::uint64_t d_seed = 0;
    ToyModelConfig d_model;
    denoise_cmd->add_option("--plan", d_input.plan_path, "tagged plan text file")->required();
    denoise_cmd->add_option("--geometry", d_input.geometry, "image size as WxH")->required();
    denoise_cmd->add_option("--patch-size", d_input.patch_size, "patch side in pixels")
        ->default_val(16);
    denoise_cmd->add_option("--text-tokens", d_input.text_tokens, "per-group token counts h0..hK")
        ->delimiter(',');
    denoise_cmd->add_option("--mask", d_mask, "ruleset name or all-ones")->default_val("standard");
    denoise_cmd->add_option("--steps", d_steps, "Euler steps")->default_val(4);
    denoise_cmd->add_option("--seed", d_seed, "noise seed")->default_val(0);
    denoise_cmd->add_option("--embed-dim", d_model.embed_dim, "embedding width")->default_val(64);
    denoise_cmd->add_option("--layers", d_model.layers, "transformer layers")->default_val(4);
    denoise_cmd->add_option("--heads", d_model.heads, "attention heads")->default_val(4);
    denoise_cmd->add_option("--out", d_out, "write the denoise report here");
    denoise_cmd->add_option("--config", d_config, "config JSON with model fields");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(validate_cmd)) {
            return run_plan_validate(v_plan, v_config);
        }
        if (app.got_subcommand(mask_cmd)) {
            if (m_layout.empty() && m_input.plan_path.empty()) {
                throw FormatError("mask-build needs --plan or --layout");
            }
            if (m_layout.empty() && m_input.geometry.empty()) {
                throw FormatError("mask-build with --plan needs --geometry");
            }
            return run_mask_build(m_input, m_layout, m_ruleset, m_out, m_emit_layout, m_verify);
        }
        if (app.got_subcommand(score_cmd)) {
            const json cfg = load_config_object(s_config);
            if (score_cmd->count("--divisor") == 0 && cfg.contains("weighted_divisor")) {
                s_divisor = cfg["weighted_divisor"].get<double>();
            }
            return run_bench_score(s_records, s_metadata, s_compare, s_divisor);
        }
        if (app.got_subcommand(perturb_cmd)) {
            const json cfg = load_config_object(p_config);
            if (perturb_cmd->count("--ruleset") == 0 && cfg.contains("ruleset")) {
                p_ruleset = cfg["ruleset"].get<std::string>();
            }
            if (p_ratios.empty() && cfg.contains("ratios")) {
                p_ratios = cfg["ratios"].get<std::vector<double>>();
            }
            if (perturb_cmd->count("--seed") == 0 && cfg.contains("seed")) {
                p_seed = cfg["seed"].get<std::uint64_t>();
            }
            return run_bench_perturb(p_input, p_ruleset, p_ratios, p_seed, p_out_dir);
        }
        if (app.got_subcommand(denoise_cmd)) {
            const json cfg = load_config_object(d_config);
            if (denoise_cmd->count("--mask") == 0 && cfg.contains("mask")) {
                d_mask = cfg["mask"].get<std::string>();
            }
            if (denoise_cmd->count("--steps") == 0 && cfg.contains("steps")) {
                d_steps = cfg["steps"].get<int>();
            }
            if (denoise_cmd->count("--seed") == 0 && cfg.contains("seed")) {
                d_seed = cfg["seed"].get<std::uint64_t>();
            }
            if (denoise_cmd->count("--embed-dim") == 0 && cfg.contains("embed_dim")) {
                d_model.embed_dim = cfg["embed_dim"].get<int>();
            }
            if (denoise_cmd->count("--layers") == 0 && cfg.contains("layers")) {
                d_model.layers = cfg["layers"].get<int>();
            }
            if (denoise_cmd->count("--heads") == 0 && cfg.contains("heads")) {
                d_model.heads = cfg["heads"].get<int>();
            }
            if (cfg.contains("mlp_ratio")) d_model.mlp_ratio = cfg["mlp_ratio"].get<int>();
            if (cfg.contains("model_seed")) d_model.seed = cfg["model_seed"].get<std::uint64_t>();
            return run_toy_denoise(d_input, d_mask, d_steps, d_seed, d_model, d_out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error_exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2; // no subcommand matched (unreachable with require_subcommand)
}
