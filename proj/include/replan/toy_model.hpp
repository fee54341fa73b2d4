#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "replan/errors.hpp"
#include "replan/layout.hpp"
#include "replan/mask.hpp"

namespace replan {

// Dense row-major real matrix; just enough linear algebra for the toy model.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

// Synthetic stand-in for encoded image features, one vector per grid patch.
struct FeatureGrid {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<double> data; // row-major patches, channel innermost

    FeatureGrid() = default;
    FeatureGrid(int r, int c, int ch)
        : rows(r), cols(c), channels(ch),
          data(static_cast<std::size_t>(r) * c * ch, 0.0) {}

    double& at(int i, int j, int c) {
        return data[(static_cast<std::size_t>(i) * cols + j) * channels + c];
    }
    double at(int i, int j, int c) const {
        return data[(static_cast<std::size_t>(i) * cols + j) * channels + c];
    }
};

FeatureGrid make_synthetic_grid(int rows, int cols, int channels, std::uint64_t seed);

struct ToyModelConfig {
    int embed_dim = 64;
    int layers = 4;
    int heads = 4;
    int mlp_ratio = 4;
    std::uint64_t seed = 0x746f796d6f64656cULL;

    void validate() const; // DomainError on bad dimensions

    bool operator==(const ToyModelConfig&) const = default;
};

struct LayerWeights {
    Matrix wq, wk, wv, wo; // embed_dim x embed_dim
    Matrix w1;             // embed_dim x (mlp_ratio * embed_dim)
    Matrix w2;             // (mlp_ratio * embed_dim) x embed_dim
};

// Fixed random weights drawn from the config seed; never trained.
class ToyModel {
public:
    static ToyModel init(const ToyModelConfig& config);

    const ToyModelConfig& config() const { return config_; }
    const std::vector<LayerWeights>& layers() const { return layers_; }
    const std::vector<double>& time_embedding() const { return tau_; }

private:
    ToyModelConfig config_;
    std::vector<LayerWeights> layers_;
    std::vector<double> tau_;
};

struct SequenceState {
    Matrix tokens; // total_tokens x embed_dim, order text | image | latent
    TokenLayout layout;
    double timestep = 0.0;
};

/// Deterministic toy embeddings: text rows from (hint text, position in
/// group), image rows from a fixed projection of the grid features, latent
/// rows from seeded unit-variance noise.
SequenceState embed_inputs(const EditPlan& plan,
                           const TokenLayout& layout,
                           const FeatureGrid& grid,
                           std::uint64_t noise_seed,
                           int embed_dim);

/// Pre-norm attention sublayer with residual. Forbidden keys are excluded
/// from the weight normalization entirely, so their weight is exactly zero.
SequenceState masked_attention(const SequenceState& state,
                               const AttentionMask& mask,
                               const LayerWeights& weights,
                               int heads);

/// Per-head attention weight matrices over the current state (inspection
/// path for small inputs; shares the row-weight routine with
/// masked_attention).
std::vector<Matrix> attention_weights(const SequenceState& state,
                                      const AttentionMask& mask,
                                      const LayerWeights& weights,
                                      int heads);

/// Pre-norm ReLU MLP sublayer with residual; acts row-wise.
SequenceState mlp_sublayer(const SequenceState& state, const LayerWeights& weights);

/// Adds timestep * tau to the latent rows, then runs every layer
/// (attention + MLP) under the mask.
SequenceState forward(const SequenceState& state, const AttentionMask& mask, const ToyModel& model);

struct DenoiseReport {
    ToyModelConfig config;
    int steps = 0;
    std::vector<double> step_norms; // Frobenius norm of the latent after each step
    std::uint64_t checksum = 0;     // FNV-1a over the final latent bytes
    Matrix final_latent;            // patches x embed_dim

    std::string to_json(int indent = -1) const;
};

/// Euler integration of the toy velocity field: t_i = i/steps, dt = 1/steps,
/// z += dt * velocity, where the velocity is the transformer output at the
/// latent rows.
DenoiseReport denoise(const EditPlan& plan,
                      const TokenLayout& layout,
                      const AttentionMask& mask,
                      const ToyModelConfig& config,
                      int steps,
                      std::uint64_t noise_seed);

/// FNV-1a over the matrix entries as little-endian IEEE-754 bytes.
std::uint64_t matrix_checksum(const Matrix& m);

} // namespace replan
