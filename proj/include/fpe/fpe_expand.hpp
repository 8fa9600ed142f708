#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fpe/masked_net.hpp"
#include "fpe/matrix.hpp"

namespace fpe {

enum class PartitionKind { Random, ClauseAware, GramCluster, Structured24 };

/// How the input support of each parent neuron is split across sub-neurons.
struct PartitionStrategy {
    PartitionKind kind = PartitionKind::Random;
    std::size_t clause_size = 0;    // ClauseAware: k, must divide the input width
    std::size_t cluster_count = 0;  // GramCluster: 0 means alpha * h
    std::uint64_t seed = 0;
};

using MaskVec = std::vector<std::uint8_t>;

/// One partition of d input positions into alpha disjoint masks summing to
/// the all-ones vector. Random splits balance sizes to within one; ClauseAware
/// deals contiguous k-blocks round-robin; Structured24 (alpha = 2, 4 | d)
/// gives each aligned group of four positions two ones per sub-neuron.
std::vector<MaskVec> partition_masks(std::size_t d, std::size_t alpha,
                                     const PartitionStrategy& strategy,
                                     std::mt19937_64& rng);

/// Convenience overload seeding a fresh generator from strategy.seed.
std::vector<MaskVec> partition_masks(std::size_t d, std::size_t alpha,
                                     const PartitionStrategy& strategy);

/// Duplicate each neuron row into alpha sub-rows gated by its partition
/// masks. Bias is copied to every sub-neuron. Weight nnz is preserved
/// exactly: sub-masks are the parent mask intersected with the partition.
MaskedLayer expand_hidden_layer(const MaskedLayer& layer, std::size_t alpha,
                                const std::vector<std::vector<MaskVec>>& partitions);

/// Duplicate each input column across alpha adjacent columns; bias copied
/// unchanged. Weight nnz grows by (alpha - 1) * nnz.
MaskedLayer expand_output_layer(const MaskedLayer& layer, std::size_t alpha);

/// Globally prune the smallest-magnitude active weights across the listed
/// layers until their combined nnz equals the budget. Ties break by
/// (layer index, row, col). Biases are never pruned.
void resparsify(const std::vector<MaskedLayer*>& layers, std::size_t budget);

struct ExpansionPlan {
    std::size_t alpha = 2;
    // Hidden layers to split (0-based). Empty selects the alternating
    // default: hidden 0, 2, 4, ... The classification head is never split.
    std::vector<std::size_t> hidden_layers;
    PartitionStrategy strategy;
};

/// Full expansion: split the planned hidden layers, widen each following
/// layer's input by column duplication, then re-sparsify the touched layers
/// back to their pre-expansion weight budget.
MlpModel fpe_expand_model(const MlpModel& model, const ExpansionPlan& plan);

/// Partitions derived from agglomerative clustering (cosine distance,
/// average linkage) of the rows of G = W1^T W1. Whole clusters are dealt to
/// sub-neurons, balancing cluster counts per sub-neuron. Falls back to the
/// random strategy when W1 is all zero.
std::vector<std::vector<MaskVec>> gram_cluster_partitions(const Matrix& w1,
                                                          std::size_t alpha,
                                                          std::size_t cluster_count,
                                                          std::uint64_t seed);

/// RigL-style mask update: unmask floor(fraction * nnz) random inactive
/// positions at weight 0, then re-prune the same number of smallest-magnitude
/// previously-active weights. Weight nnz is unchanged. Returns the number of
/// positions unmasked.
std::size_t rewire_masks(MlpModel& model, double fraction, std::mt19937_64& rng);

}  // namespace fpe
