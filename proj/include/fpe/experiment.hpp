#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpe/dnf_gen.hpp"
#include "fpe/training.hpp"

#include "json.hpp"

namespace fpe {

enum class TaskKind { Dnf, Idx, Fpee };

/// Everything one reproducible experiment run needs. Parsed from the JSON
/// config file; CLI flags override individual fields.
struct ExperimentConfig {
    TaskKind task = TaskKind::Dnf;

    // dnf task
    DnfSpec dnf{32, 4};
    std::size_t train_samples = 10000;
    std::size_t test_samples = 2000;
    bool jitter_inputs = true;

    // idx task
    std::string idx_train_images, idx_train_labels;
    std::string idx_test_images, idx_test_labels;

    // fpee task
    std::string fpee_train, fpee_test;

    // model
    std::vector<std::size_t> hidden = {8};
    bool use_layer_norm = false;
    bool biases = true;

    // optimization; train.epochs is the continue phase for split variants
    TrainConfig train;
    std::size_t pretrain_epochs = 0;

    // expansion
    std::size_t alpha = 2;
    std::size_t gram_clusters = 0;  // 0 means alpha * h
    std::vector<std::string> variants = {"dense", "clause_split", "random_split"};
    bool shared_init_seed = true;

    // outputs
    std::string out_dir = ".";
    std::string label = "experiment";
    bool save_models = false;
    bool write_events = false;

    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError before any compute
};

struct TrialRow {
    std::string variant;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    std::size_t nnz_weights = 0;
    std::size_t nnz_params = 0;
    double total_capacity = 0.0;
    double mean_cosine = 0.0;
    double accuracy_per_param = 0.0;
};

struct VariantSummary {
    std::string variant;
    double mean_accuracy = 0.0;
    double stderr_accuracy = 0.0;
    double mean_capacity = 0.0;
    double mean_cosine = 0.0;
    // vs the dense rows of the same result; NaN when dense is absent or the
    // test is degenerate.
    double relative_improvement = 0.0;
    double p_value_vs_dense = 0.0;
    std::size_t best_trial = 0;
    double best_accuracy = 0.0;
};

struct ExperimentResult {
    std::vector<TrialRow> rows;  // variant-major, then trial order
    std::vector<VariantSummary> summaries;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

/// The full pipeline: build or load the task data, then per trial train the
/// dense baseline for pretrain+continue epochs and each split variant for
/// pretrain epochs, expand, and continue, all from deterministic derived
/// seeds. Metrics are computed on the trained first-layer weights.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<VariantSummary> summarize(const std::vector<TrialRow>& rows);

std::string trial_csv_text(const std::vector<TrialRow>& rows);
std::vector<TrialRow> parse_trial_csv(const std::string& text);

/// Write <label>_trials.csv and <label>_aggregate.json under out_dir
/// (atomically, via rename). Returns the trials CSV path.
std::string write_experiment_outputs(const ExperimentConfig& cfg,
                                     const ExperimentResult& result);

struct SweepAxes {
    std::vector<std::size_t> neurons = {};
    std::vector<std::size_t> clauses = {};
    std::vector<std::size_t> alphas = {};
};

struct SweepConfig {
    ExperimentConfig base;
    SweepAxes axes;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);

/// Cartesian product of the axes; each cell is one run_experiment whose
/// outputs land under base.out_dir. Cells with an existing trials CSV are
/// skipped and their rows reloaded, so interrupted sweeps resume. Emits a
/// long-format CSV plus one relative-improvement pivot CSV per (variant,
/// alpha) pair.
void run_sweep(const SweepConfig& cfg);

}  // namespace fpe
