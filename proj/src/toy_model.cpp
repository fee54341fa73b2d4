#include "replan/toy_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "replan/rng.hpp"

namespace replan {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kImageProjSeed = 0x696d6750726f6aULL;
constexpr std::uint64_t kGridSeedSalt = 0x6772696473616cULL;
constexpr int kGridChannels = 8;
constexpr double kRmsEps = 1e-6;

// Positive monotonic score kernel: s + sqrt(1 + s^2). Uses only IEEE-exact
// operations, so attention is bit-reproducible across platforms.
double score_kernel(double s) {
    return std::max(s + std::sqrt(1.0 + s * s), 1e-300);
}

Matrix random_matrix(SplitMix64& rng, int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.normal() * scale;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeError("matmul dimension mismatch");
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) {
                out.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return out;
}

Matrix rms_norm(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < m.cols; ++c) sum += m.at(r, c) * m.at(r, c);
        const double denom = std::sqrt(sum / m.cols + kRmsEps);
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) / denom;
    }
    return out;
}

void check_state(const SequenceState& state, int expected_cols = -1) {
    if (state.tokens.rows != state.layout.total_tokens()) {
        throw ShapeError("token matrix rows do not match the layout");
    }
    if (state.tokens.cols < 1) throw ShapeError("token matrix has no columns");
    if (expected_cols > 0 && state.tokens.cols != expected_cols) {
        throw ShapeError("token matrix width does not match the model embed_dim");
    }
}

// Weights for one query row and head: allowed key indices plus their
// normalized kernel weights. Shared by masked_attention and
// attention_weights so both routes agree bit-for-bit.
void row_weights(const Matrix& q,
                 const Matrix& k,
                 const AttentionMask& mask,
                 int u,
                 int head_begin,
                 int head_dim,
                 std::vector<int>& keys,
                 std::vector<double>& weights) {
    keys.clear();
    weights.clear();
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    double total = 0.0;
    for (int v = 0; v < q.rows; ++v) {
        if (!mask.get(u, v)) continue;
        double s = 0.0;
        for (int d = 0; d < head_dim; ++d) {
            s += q.at(u, head_begin + d) * k.at(v, head_begin + d);
        }
        const double w = score_kernel(s * scale);
        keys.push_back(v);
        weights.push_back(w);
        total += w;
    }
    if (keys.empty()) throw MaskError("query row " + std::to_string(u) + " has no allowed keys");
    for (double& w : weights) w /= total;
}

} // namespace

FeatureGrid make_synthetic_grid(int rows, int cols, int channels, std::uint64_t seed) {
    if (rows < 1 || cols < 1 || channels < 1) throw ShapeError("feature grid dimensions must be positive");
    FeatureGrid grid(rows, cols, channels);
    SplitMix64 rng(seed);
    for (double& x : grid.data) x = rng.normal();
    return grid;
}

void ToyModelConfig::validate() const {
    if (embed_dim < 1 || layers < 1 || heads < 1 || mlp_ratio < 1) {
        throw DomainError("toy model dimensions must be positive");
    }
    if (embed_dim % heads != 0) throw DomainError("embed_dim must be divisible by heads");
}

ToyModel ToyModel::init(const ToyModelConfig& config) {
    config.validate();
    ToyModel model;
    model.config_ = config;
    SplitMix64 rng(config.seed);
    const int d = config.embed_dim;
    const int m = config.mlp_ratio * d;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double mlp_scale = 1.0 / std::sqrt(static_cast<double>(m));
    model.layers_.reserve(config.layers);
    for (int i = 0; i < config.layers; ++i) {
        LayerWeights w;
        w.wq = random_matrix(rng, d, d, attn_scale);
        w.wk = random_matrix(rng, d, d, attn_scale);
        w.wv = random_matrix(rng, d, d, attn_scale);
        w.wo = random_matrix(rng, d, d, attn_scale);
        w.w1 = random_matrix(rng, d, m, attn_scale);
        w.w2 = random_matrix(rng, m, d, mlp_scale);
        model.layers_.push_back(std::move(w));
    }
    model.tau_.resize(d);
    for (double& x : model.tau_) x = rng.normal();
    return model;
}

SequenceState embed_inputs(const EditPlan& plan,
                           const TokenLayout& layout,
                           const FeatureGrid& grid,
                           std::uint64_t noise_seed,
                           int embed_dim) {
    if (embed_dim < 1) throw ShapeError("embed_dim must be positive");
    if (grid.rows != layout.grid_rows() || grid.cols != layout.grid_cols()) {
        throw ShapeError("feature grid does not match the layout patch grid");
    }
    if (grid.channels < 1) throw ShapeError("feature grid has no channels");
    if (static_cast<int>(plan.regions.size()) != layout.region_count()) {
        throw ShapeError("plan region count does not match the layout");
    }

    SequenceState state;
    state.layout = layout;
    state.tokens = Matrix(layout.total_tokens(), embed_dim);
    state.timestep = 0.0;

    // text rows: seeded by (hint text, position within the group)
    for (int g = 0; g < layout.group_count(); ++g) {
        const std::string& hint = g == 0 ? plan.global_hint : plan.regions[g - 1].hint;
        const TokenRange range = layout.text_group(g);
        for (int p = 0; p < range.size(); ++p) {
            SplitMix64 rng(hash_mix(fnv1a64(hint), static_cast<std::uint64_t>(p)));
            for (int d = 0; d < embed_dim; ++d) {
                state.tokens.at(range.begin + p, d) = rng.normal();
            }
        }
    }

    // image rows: fixed random projection of the grid features
    SplitMix64 proj_rng(kImageProjSeed);
    Matrix proj(grid.channels, embed_dim);
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(grid.channels));
    for (double& x : proj.data) x = proj_rng.normal() * proj_scale;
    const int img = layout.image_offset();
    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            const int row = img + layout.patch_index(i, j);
            for (int d = 0; d < embed_dim; ++d) {
                double acc = 0.0;
                for (int c = 0; c < grid.channels; ++c) {
                    acc += grid.at(i, j, c) * proj.at(c, d);
                }
                state.tokens.at(row, d) = acc;
            }
        }
    }

    // latent rows: one seeded noise stream, row-major
    SplitMix64 noise(noise_seed);
    const int lat = layout.latent_offset();
    for (int p = 0; p < layout.geometry().patch_count(); ++p) {
        for (int d = 0; d < embed_dim; ++d) {
            state.tokens.at(lat + p, d) = noise.normal();
        }
    }
    return state;
}

SequenceState masked_attention(const SequenceState& state,
                               const AttentionMask& mask,
                               const LayerWeights& weights,
                               int heads) {
    check_state(state);
    if (mask.size() != state.tokens.rows) throw ShapeError("mask size does not match the sequence");
    const int d = state.tokens.cols;
    if (heads < 1 || d % heads != 0) throw ShapeError("embed_dim must be divisible by heads");
    if (weights.wq.rows != d || weights.wq.cols != d) throw ShapeError("wq shape mismatch");
    const int head_dim = d / heads;

    const Matrix normed = rms_norm(state.tokens);
    const Matrix q = matmul(normed, weights.wq);
    const Matrix k = matmul(normed, weights.wk);
    const Matrix v = matmul(normed, weights.wv);

    Matrix mixed(state.tokens.rows, d);
    std::vector<int> keys;
    std::vector<double> wrow;
    for (int u = 0; u < state.tokens.rows; ++u) {
        for (int h = 0; h < heads; ++h) {
            const int begin = h * head_dim;
            row_weights(q, k, mask, u, begin, head_dim, keys, wrow);
            for (std::size_t i = 0; i < keys.size(); ++i) {
                const int key = keys[i];
                const double w = wrow[i];
                for (int dd = 0; dd < head_dim; ++dd) {
                    mixed.at(u, begin + dd) += w * v.at(key, begin + dd);
                }
            }
        }
    }

    SequenceState out = state;
    const Matrix projected = matmul(mixed, weights.wo);
    for (std::size_t i = 0; i < out.tokens.data.size(); ++i) {
        out.tokens.data[i] += projected.data[i];
    }
    return out;
}

std::vector<Matrix> attention_weights(const SequenceState& state,
                                      const AttentionMask& mask,
                                      const LayerWeights& weights,
                                      int heads) {
    check_state(state);
    if (mask.size() != state.tokens.rows) throw ShapeError("mask size does not match the sequence");
    const int d = state.tokens.cols;
    if (heads < 1 || d % heads != 0) throw ShapeError("embed_dim must be divisible by heads");
    const int head_dim = d / heads;

    const Matrix normed = rms_norm(state.tokens);
    const Matrix q = matmul(normed, weights.wq);
    const Matrix k = matmul(normed, weights.wk);

    std::vector<Matrix> out(heads, Matrix(state.tokens.rows, state.tokens.rows));
    std::vector<int> keys;
    std::vector<double> wrow;
    for (int h = 0; h < heads; ++h) {
        for (int u = 0; u < state.tokens.rows; ++u) {
            row_weights(q, k, mask, u, h * head_dim, head_dim, keys, wrow);
            for (std::size_t i = 0; i < keys.size(); ++i) {
                out[h].at(u, keys[i]) = wrow[i];
            }
        }
    }
    return out;
}

SequenceState mlp_sublayer(const SequenceState& state, const LayerWeights& weights) {
    check_state(state);
    const int d = state.tokens.cols;
    if (weights.w1.rows != d || weights.w2.cols != d || weights.w1.cols != weights.w2.rows) {
        throw ShapeError("mlp weight shape mismatch");
    }
    const Matrix normed = rms_norm(state.tokens);
    Matrix hidden = matmul(normed, weights.w1);
    for (double& x : hidden.data) x = std::max(x, 0.0);
    const Matrix projected = matmul(hidden, weights.w2);
    SequenceState out = state;
    for (std::size_t i = 0; i < out.tokens.data.size(); ++i) {
        out.tokens.data[i] += projected.data[i];
    }
    return out;
}

SequenceState forward(const SequenceState& state, const AttentionMask& mask, const ToyModel& model) {
    check_state(state, model.config().embed_dim);
    SequenceState s = state;
    const int lat = s.layout.latent_offset();
    const int patches = s.layout.geometry().patch_count();
    const std::vector<double>& tau = model.time_embedding();
    for (int p = 0; p < patches; ++p) {
        for (int d = 0; d < s.tokens.cols; ++d) {
            s.tokens.at(lat + p, d) += s.timestep * tau[d];
        }
    }
    for (const LayerWeights& layer : model.layers()) {
        s = masked_attention(s, mask, layer, model.config().heads);
        s = mlp_sublayer(s, layer);
    }
    return s;
}

DenoiseReport denoise(const EditPlan& plan,
                      const TokenLayout& layout,
                      const AttentionMask& mask,
                      const ToyModelConfig& config,
                      int steps,
                      std::uint64_t noise_seed) {
    if (steps < 1) throw DomainError("steps must be >= 1");
    config.validate();
    const ToyModel model = ToyModel::init(config);
    const FeatureGrid grid = make_synthetic_grid(layout.grid_rows(), layout.grid_cols(),
                                                 kGridChannels, hash_mix(noise_seed, kGridSeedSalt));
    const SequenceState base = embed_inputs(plan, layout, grid, noise_seed, config.embed_dim);

    const int lat = layout.latent_offset();
    const int patches = layout.geometry().patch_count();
    Matrix z(patches, config.embed_dim);
    for (int p = 0; p < patches; ++p) {
        for (int d = 0; d < config.embed_dim; ++d) z.at(p, d) = base.tokens.at(lat + p, d);
    }

    DenoiseReport report;
    report.config = config;
    report.steps = steps;
    const double dt = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        SequenceState s = base;
        s.timestep = static_cast<double>(i) / steps;
        for (int p = 0; p < patches; ++p) {
            for (int d = 0; d < config.embed_dim; ++d) s.tokens.at(lat + p, d) = z.at(p, d);
        }
        const SequenceState out = forward(s, mask, model);
        for (int p = 0; p < patches; ++p) {
            for (int d = 0; d < config.embed_dim; ++d) {
                z.at(p, d) += dt * out.tokens.at(lat + p, d);
            }
        }
        double sum = 0.0;
        for (const double x : z.data) sum += x * x;
        report.step_norms.push_back(std::sqrt(sum));
    }
    report.final_latent = z;
    report.checksum = matrix_checksum(z);
    return report;
}

std::uint64_t matrix_checksum(const Matrix& m) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const double x : m.data) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        std::uint8_t bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF);
        hash = fnv1a64(bytes, 8, hash);
    }
    return hash;
}

std::string DenoiseReport::to_json(int indent) const {
    json doc;
    doc["config"] = {{"embed_dim", config.embed_dim},
                     {"layers", config.layers},
                     {"heads", config.heads},
                     {"mlp_ratio", config.mlp_ratio},
                     {"seed", config.seed}};
    doc["steps"] = steps;
    doc["step_norms"] = step_norms;
    char hex[19];
    std::snprintf(hex, sizeof(hex), "0x%016llx", static_cast<unsigned long long>(checksum));
    doc["checksum"] = hex;
    doc["latent"] = {{"rows", final_latent.rows}, {"cols", final_latent.cols}};
    return doc.dump(indent);
}

} // namespace replan
