#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpe/matrix.hpp"

namespace fpe {

/// Weight matrix plus binary mask; the unit of all sparsity bookkeeping.
/// Invariant: weights[i,j] == 0 wherever mask[i,j] == 0.
struct MaskedLayer {
    Matrix weights;             // out x in
    Matrix mask;                // out x in, entries 0 or 1
    std::vector<double> bias;   // empty when the layer has no bias

    std::size_t out_dim() const { return weights.rows; }
    std::size_t in_dim() const { return weights.cols; }
    bool has_bias() const { return !bias.empty(); }

    /// Count of mask ones (active weight slots).
    std::size_t nnz() const;

    /// Zero weights at masked positions. Idempotent.
    void apply_mask();
};

enum class OutputKind { BinarySigmoid, MulticlassLogits };

/// Stack of masked layers with ReLU hidden activations, optional LayerNorm
/// before each hidden activation, and a sigmoid or raw-logit head.
struct MlpModel {
    std::vector<MaskedLayer> layers;
    bool use_layer_norm = false;
    OutputKind output_kind = OutputKind::BinarySigmoid;
    std::uint64_t seed = 0;

    // Affine LayerNorm parameters, one pair of vectors per hidden layer.
    // Empty when use_layer_norm is false.
    std::vector<std::vector<double>> ln_gain;
    std::vector<std::vector<double>> ln_shift;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t hidden_count() const { return layers.size() - 1; }
    std::vector<std::size_t> dims() const;
};

struct InitOptions {
    bool biases = true;
    bool layer_norm = false;
    OutputKind output_kind = OutputKind::BinarySigmoid;
};

/// Build a dense model: weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)),
/// biases zero, LayerNorm gain 1 / shift 0, all-ones masks. Deterministic
/// given the seed.
MlpModel init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
                    const InitOptions& options = {});

/// Intermediate values of one forward pass, as needed by backward.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre_act;     // z_l = h_{l-1} W_l^T + b_l
    std::vector<Matrix> normed;      // x-hat of LayerNorm (pre-affine); empty without LN
    std::vector<std::vector<double>> ln_inv_std;  // per hidden layer, per row
    std::vector<Matrix> post_act;    // hidden activations after ReLU
    Matrix output;                   // sigmoid probabilities or raw logits
};

/// Run the model on a batch (rows are samples). If cache is non-null it is
/// filled for a subsequent backward call.
Matrix forward(const MlpModel& model, const Matrix& x, ForwardCache* cache = nullptr);

struct LayerGrads {
    Matrix d_weights;
    std::vector<double> d_bias;
};

struct ModelGrads {
    std::vector<LayerGrads> layers;
    std::vector<std::vector<double>> d_ln_gain;
    std::vector<std::vector<double>> d_ln_shift;
};

ModelGrads zero_grads(const MlpModel& model);

/// Gradients of the mean task loss (BCE or CE per output_kind) with respect
/// to all parameters. Entries at masked weight positions are forced to zero.
ModelGrads backward(const MlpModel& model, const ForwardCache& cache,
                    const std::vector<int>& y);

/// Mask ones summed over layers (weight slots only).
std::size_t nonzero_weight_count(const MlpModel& model);

/// Weight slots plus bias entries. LayerNorm parameters are reported
/// separately by the CLI and are not part of this count.
std::size_t nonzero_param_count(const MlpModel& model);

/// Re-zero weights at masked positions in every layer. Idempotent.
void apply_masks(MlpModel& model);

/// True when every layer satisfies the mask/weight consistency invariant.
bool masks_consistent(const MlpModel& model);

// Checkpoint format: u32 JSON header length, JSON header (dims, flags, seed,
// nnz), then per layer length-prefixed little-endian f64 payloads for
// weights, bias, and mask, then LayerNorm vectors when present.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace fpe
