#include "fpe/fpe_expand.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <tuple>

#include "fpe/interference_metrics.hpp"
#include "fpe/rng.hpp"

namespace fpe {

namespace {

void check_partition_family(const std::vector<MaskVec>& masks, std::size_t d,
                            std::size_t alpha) {
    if (masks.size() != alpha)
        throw std::invalid_argument("partition: expected alpha masks");
    std::vector<unsigned> counts(d, 0);
    for (const MaskVec& m : masks) {
        if (m.size() != d) throw std::invalid_argument("partition: mask length != d");
        for (std::size_t i = 0; i < d; ++i) counts[i] += m[i];
    }
    for (unsigned c : counts)
        if (c != 1) throw std::invalid_argument("partition: masks must sum to the ones vector");
}

}  // namespace

std::vector<MaskVec> partition_masks(std::size_t d, std::size_t alpha,
                                     const PartitionStrategy& strategy,
                                     std::mt19937_64& rng) {
    if (alpha < 2) throw std::invalid_argument("partition_masks: alpha must be >= 2");
    if (d == 0) throw std::invalid_argument("partition_masks: d must be positive");
    std::vector<MaskVec> masks(alpha, MaskVec(d, 0));
    switch (strategy.kind) {
        case PartitionKind::Random: {
            std::vector<std::size_t> order(d);
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            // Contiguous chunks of the shuffled order; the first d % alpha
            // masks take the extra element.
            std::size_t pos = 0;
            for (std::size_t j = 0; j < alpha; ++j) {
                std::size_t take = d / alpha + (j < d % alpha ? 1 : 0);
                for (std::size_t t = 0; t < take; ++t) masks[j][order[pos++]] = 1;
            }
            break;
        }
        case PartitionKind::ClauseAware: {
            const std::size_t k = strategy.clause_size;
            if (k == 0 || d % k != 0)
                throw std::invalid_argument("partition_masks: clause size must divide d");
            for (std::size_t block = 0; block < d / k; ++block)
                for (std::size_t i = block * k; i < (block + 1) * k; ++i)
                    masks[block % alpha][i] = 1;
            break;
        }
        case PartitionKind::Structured24: {
            if (alpha != 2)
                throw std::invalid_argument("partition_masks: 2:4 pattern requires alpha = 2");
            if (d % 4 != 0)
                throw std::invalid_argument("partition_masks: 2:4 pattern requires 4 | d");
            // Two of each aligned group of four go to each sub-neuron.
            static constexpr std::uint8_t kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3},
                                                          {1, 2}, {1, 3}, {2, 3}};
            std::uniform_int_distribution<int> pick(0, 5);
            for (std::size_t g = 0; g < d; g += 4) {
                const auto& pair = kPairs[pick(rng)];
                masks[0][g + pair[0]] = 1;
                masks[0][g + pair[1]] = 1;
                for (std::size_t t = 0; t < 4; ++t)
                    if (!masks[0][g + t]) masks[1][g + t] = 1;
            }
            break;
        }
        case PartitionKind::GramCluster:
            throw std::invalid_argument(
                "partition_masks: gram partitions come from gram_cluster_partitions");
    }
    check_partition_family(masks, d, alpha);
    return masks;
}

std::vector<MaskVec> partition_masks(std::size_t d, std::size_t alpha,
                                     const PartitionStrategy& strategy) {
    auto rng = make_rng(strategy.seed);
    return partition_masks(d, alpha, strategy, rng);
}

MaskedLayer expand_hidden_layer(const MaskedLayer& layer, std::size_t alpha,
                                const std::vector<std::vector<MaskVec>>& partitions) {
    if (alpha < 2) throw std::invalid_argument("expand_hidden_layer: alpha must be >= 2");
    const std::size_t h = layer.out_dim();
    const std::size_t d = layer.in_dim();
    if (partitions.size() != h)
        throw std::invalid_argument("expand_hidden_layer: need one partition per neuron");

    MaskedLayer out;
    out.weights = Matrix(alpha * h, d);
    out.mask = Matrix(alpha * h, d);
    if (layer.has_bias()) out.bias.assign(alpha * h, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        check_partition_family(partitions[i], d, alpha);
        for (std::size_t j = 0; j < alpha; ++j) {
            const std::size_t row = alpha * i + j;
            const MaskVec& gate = partitions[i][j];
            for (std::size_t col = 0; col < d; ++col) {
                if (gate[col] && layer.mask(i, col) != 0.0) {
                    out.weights(row, col) = layer.weights(i, col);
                    out.mask(row, col) = 1.0;
                }
            }
            if (layer.has_bias()) out.bias[row] = layer.bias[i];
        }
    }
    return out;
}

MaskedLayer expand_output_layer(const MaskedLayer& layer, std::size_t alpha) {
    const std::size_t rows = layer.out_dim();
    const std::size_t h = layer.in_dim();
    MaskedLayer out;
    out.weights = Matrix(rows, alpha * h);
    out.mask = Matrix(rows, alpha * h);
    out.bias = layer.bias;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < h; ++j) {
            for (std::size_t t = 0; t < alpha; ++t) {
                out.weights(i, alpha * j + t) = layer.weights(i, j);
                out.mask(i, alpha * j + t) = layer.mask(i, j);
            }
        }
    }
    return out;
}

void resparsify(const std::vector<MaskedLayer*>& layers, std::size_t budget) {
    std::size_t current = 0;
    for (const MaskedLayer* layer : layers) current += layer->nnz();
    if (budget > current)
        throw std::invalid_argument("resparsify: budget exceeds current nnz");
    if (budget == current) return;

    struct Candidate {
        double magnitude;
        std::size_t layer, row, col;
    };
    std::vector<Candidate> active;
    active.reserve(current);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const MaskedLayer& layer = *layers[l];
        for (std::size_t i = 0; i < layer.out_dim(); ++i)
            for (std::size_t j = 0; j < layer.in_dim(); ++j)
                if (layer.mask(i, j) != 0.0)
                    active.push_back({std::abs(layer.weights(i, j)), l, i, j});
    }
    // (magnitude, layer, row, col) is a total order, so the pruned set is
    // unique and deterministic.
    const std::size_t to_prune = current - budget;
    std::nth_element(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(to_prune),
                     active.end(), [](const Candidate& a, const Candidate& b) {
                         return std::tie(a.magnitude, a.layer, a.row, a.col) <
                                std::tie(b.magnitude, b.layer, b.row, b.col);
                     });
    for (std::size_t t = 0; t < to_prune; ++t) {
        const Candidate& c = active[t];
        layers[c.layer]->mask(c.row, c.col) = 0.0;
        layers[c.layer]->weights(c.row, c.col) = 0.0;
    }
}

namespace {

std::vector<std::vector<MaskVec>> strategy_partitions(const MaskedLayer& layer,
                                                      std::size_t alpha,
                                                      const PartitionStrategy& strategy,
                                                      std::uint64_t layer_seed) {
    if (strategy.kind == PartitionKind::GramCluster)
        return gram_cluster_partitions(layer.weights, alpha, strategy.cluster_count,
                                       layer_seed);
    auto rng = make_rng(layer_seed);
    std::vector<std::vector<MaskVec>> partitions;
    partitions.reserve(layer.out_dim());
    for (std::size_t i = 0; i < layer.out_dim(); ++i)
        partitions.push_back(partition_masks(layer.in_dim(), alpha, strategy, rng));
    return partitions;
}

}  // namespace

MlpModel fpe_expand_model(const MlpModel& model, const ExpansionPlan& plan) {
    if (plan.alpha < 2) throw std::invalid_argument("fpe_expand_model: alpha must be >= 2");
    const std::size_t hidden_count = model.hidden_count();
    std::vector<std::size_t> targets = plan.hidden_layers;
    if (targets.empty()) {
        for (std::size_t t = 0; t < hidden_count; t += 2) targets.push_back(t);
    }
    std::sort(targets.begin(), targets.end());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] >= hidden_count)
            throw std::invalid_argument(
                "fpe_expand_model: cannot expand the classification head");
        if (i > 0 && targets[i] == targets[i - 1])
            throw std::invalid_argument("fpe_expand_model: duplicate layer in plan");
        if (i > 0 && targets[i] == targets[i - 1] + 1)
            throw std::invalid_argument(
                "fpe_expand_model: consecutive hidden layers violate the alternating rule");
    }

    MlpModel out = model;
    std::size_t budget = 0;
    std::vector<MaskedLayer*> pool;
    for (std::size_t t : targets) {
        budget += model.layers[t].nnz() + model.layers[t + 1].nnz();
        const std::uint64_t layer_seed = derive_seed(plan.strategy.seed, "partition", t);
        auto partitions = strategy_partitions(model.layers[t], plan.alpha, plan.strategy,
                                              layer_seed);
        out.layers[t] = expand_hidden_layer(model.layers[t], plan.alpha, partitions);
        out.layers[t + 1] = expand_output_layer(model.layers[t + 1], plan.alpha);
        if (model.use_layer_norm && t < model.ln_gain.size()) {
            std::vector<double> gain(plan.alpha * model.ln_gain[t].size());
            std::vector<double> shift(plan.alpha * model.ln_shift[t].size());
            for (std::size_t i = 0; i < model.ln_gain[t].size(); ++i) {
                for (std::size_t j = 0; j < plan.alpha; ++j) {
                    gain[plan.alpha * i + j] = model.ln_gain[t][i];
                    shift[plan.alpha * i + j] = model.ln_shift[t][i];
                }
            }
            out.ln_gain[t] = std::move(gain);
            out.ln_shift[t] = std::move(shift);
        }
        pool.push_back(&out.layers[t]);
        pool.push_back(&out.layers[t + 1]);
    }
    resparsify(pool, budget);
    return out;
}

namespace {

double cosine_rows(const Matrix& g, std::size_t a, std::size_t b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < g.cols; ++j) {
        dot += g(a, j) * g(b, j);
        na += g(a, j) * g(a, j);
        nb += g(b, j) * g(b, j);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace

std::vector<std::vector<MaskVec>> gram_cluster_partitions(const Matrix& w1,
                                                          std::size_t alpha,
                                                          std::size_t cluster_count,
                                                          std::uint64_t seed) {
    if (alpha < 2) throw std::invalid_argument("gram_cluster_partitions: alpha must be >= 2");
    const std::size_t h = w1.rows;
    const std::size_t d = w1.cols;
    const bool all_zero =
        std::all_of(w1.data.begin(), w1.data.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
        // Degenerate first layer carries no grouping signal; fall back to
        // random splits.
        PartitionStrategy random{PartitionKind::Random, 0, 0, seed};
        auto rng = make_rng(seed);
        std::vector<std::vector<MaskVec>> partitions;
        for (std::size_t i = 0; i < h; ++i)
            partitions.push_back(partition_masks(d, alpha, random, rng));
        return partitions;
    }

    std::size_t target = cluster_count ? cluster_count : alpha * h;
    target = std::clamp<std::size_t>(target, std::min(alpha, d), d);

    const Matrix gram = gram_matrix(w1);

    // Average-linkage agglomerative clustering on cosine distance between
    // Gram rows, via Lance-Williams updates on a dense distance matrix.
    std::vector<std::vector<std::size_t>> clusters(d);
    for (std::size_t i = 0; i < d; ++i) clusters[i] = {i};
    Matrix dist(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            dist(i, j) = dist(j, i) = 1.0 - cosine_rows(gram, i, j);
    std::vector<bool> alive(d, true);
    std::size_t alive_count = d;
    while (alive_count > target) {
        std::size_t best_i = 0, best_j = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < d; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < d; ++j) {
                if (!alive[j]) continue;
                if (dist(i, j) < best) {
                    best = dist(i, j);
                    best_i = i;
                    best_j = j;
                }
            }
        }
        const double wa = static_cast<double>(clusters[best_i].size());
        const double wb = static_cast<double>(clusters[best_j].size());
        for (std::size_t c = 0; c < d; ++c) {
            if (!alive[c] || c == best_i || c == best_j) continue;
            const double merged = (wa * dist(best_i, c) + wb * dist(best_j, c)) / (wa + wb);
            dist(best_i, c) = dist(c, best_i) = merged;
        }
        clusters[best_i].insert(clusters[best_i].end(), clusters[best_j].begin(),
                                clusters[best_j].end());
        clusters[best_j].clear();
        alive[best_j] = false;
        --alive_count;
    }
    std::vector<std::vector<std::size_t>> final_clusters;
    for (std::size_t c = 0; c < d; ++c)
        if (alive[c]) final_clusters.push_back(std::move(clusters[c]));

    // Per neuron, deal whole clusters round-robin in a shuffled order so
    // cluster counts per sub-neuron differ by at most one.
    auto rng = make_rng(derive_seed(seed, "gram-deal"));
    std::vector<std::vector<MaskVec>> partitions(h);
    std::vector<std::size_t> order(final_clusters.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < h; ++i) {
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<MaskVec> masks(alpha, MaskVec(d, 0));
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            for (std::size_t feature : final_clusters[order[pos]])
                masks[pos % alpha][feature] = 1;
        partitions[i] = std::move(masks);
    }
    return partitions;
}

std::size_t rewire_masks(MlpModel& model, double fraction, std::mt19937_64& rng) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw std::invalid_argument("rewire_masks: fraction must lie in [0, 1)");

    struct Position {
        std::size_t layer, row, col;
    };
    std::vector<Position> inactive;
    std::size_t nnz = 0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const MaskedLayer& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.out_dim(); ++i)
            for (std::size_t j = 0; j < layer.in_dim(); ++j)
                if (layer.mask(i, j) == 0.0)
                    inactive.push_back({l, i, j});
                else
                    ++nnz;
    }
    std::size_t n_rewire = static_cast<std::size_t>(fraction * static_cast<double>(nnz));
    if (n_rewire > inactive.size()) {
        std::cerr << "rewire_masks: requested " << n_rewire << " positions, only "
                  << inactive.size() << " masked; clipping\n";
        n_rewire = inactive.size();
    }
    if (n_rewire == 0) return 0;

    // Candidates for re-pruning are the weights active before this update.
    struct Candidate {
        double magnitude;
        std::size_t layer, row, col;
    };
    std::vector<Candidate> previously_active;
    previously_active.reserve(nnz);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const MaskedLayer& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.out_dim(); ++i)
            for (std::size_t j = 0; j < layer.in_dim(); ++j)
                if (layer.mask(i, j) != 0.0)
                    previously_active.push_back({std::abs(layer.weights(i, j)), l, i, j});
    }

    for (std::size_t t = 0; t < n_rewire; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, inactive.size() - 1);
        std::swap(inactive[t], inactive[pick(rng)]);
        const Position& p = inactive[t];
        // New connections start at zero so the loss is continuous across the
        // rewiring step.
        model.layers[p.layer].mask(p.row, p.col) = 1.0;
        model.layers[p.layer].weights(p.row, p.col) = 0.0;
    }

    std::nth_element(previously_active.begin(),
                     previously_active.begin() + static_cast<std::ptrdiff_t>(n_rewire),
                     previously_active.end(), [](const Candidate& a, const Candidate& b) {
                         return std::tie(a.magnitude, a.layer, a.row, a.col) <
                                std::tie(b.magnitude, b.layer, b.row, b.col);
                     });
    for (std::size_t t = 0; t < n_rewire; ++t) {
        const Candidate& c = previously_active[t];
        model.layers[c.layer].mask(c.row, c.col) = 0.0;
        model.layers[c.layer].weights(c.row, c.col) = 0.0;
    }
    return n_rewire;
}

}  // namespace fpe
