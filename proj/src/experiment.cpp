#include "fpe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "fpe/data_io.hpp"
#include "fpe/errors.hpp"
#include "fpe/fpe_expand.hpp"
#include "fpe/interference_metrics.hpp"
#include "fpe/rng.hpp"

namespace fs = std::filesystem;

namespace fpe {

namespace {

const std::set<std::string> kKnownVariants = {"dense", "clause_split", "random_split",
                                              "gram_split", "structured_2_4"};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw FormatError("cannot open for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw FormatError("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

}  // namespace

void ExperimentConfig::validate() const {
    if (hidden.empty()) throw ConfigError("config: need at least one hidden layer");
    for (std::size_t h : hidden)
        if (h == 0) throw ConfigError("config: zero hidden width");
    if (variants.empty()) throw ConfigError("config: variants list is empty");
    for (const auto& v : variants) {
        if (!kKnownVariants.count(v)) throw ConfigError("config: unknown variant '" + v + "'");
        if (v == "clause_split" && task != TaskKind::Dnf)
            throw ConfigError("config: clause_split requires the dnf task");
        if (v == "structured_2_4" && alpha != 2)
            throw ConfigError("config: structured_2_4 requires alpha = 2");
    }
    const bool any_split = std::any_of(variants.begin(), variants.end(),
                                       [](const std::string& v) { return v != "dense"; });
    if (any_split && alpha < 2) throw ConfigError("config: alpha must be >= 2 for splits");
    if (train.trials == 0) throw ConfigError("config: trials must be >= 1");
    if (task == TaskKind::Dnf) {
        try {
            dnf.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        if (train_samples == 0 || train_samples % 2 != 0 || test_samples % 2 != 0)
            throw ConfigError("config: dnf sample counts must be even and positive");
    } else if (task == TaskKind::Idx) {
        for (const std::string& p :
             {idx_train_images, idx_train_labels, idx_test_images, idx_test_labels})
            if (!fs::exists(p)) throw ConfigError("config: missing idx file: " + p);
    } else {
        for (const std::string& p : {fpee_train, fpee_test})
            if (!fs::exists(p)) throw ConfigError("config: missing fpee file: " + p);
    }
}

namespace {

struct TaskData {
    Matrix x_train, x_test;
    std::vector<int> y_train, y_test;
    std::size_t input_dim = 0;
    OutputKind head = OutputKind::BinarySigmoid;
    std::size_t output_dim = 1;
};

TaskData load_task(const ExperimentConfig& cfg) {
    TaskData data;
    switch (cfg.task) {
        case TaskKind::Dnf: {
            BooleanDataset train_set =
                generate(cfg.train_samples, cfg.dnf, derive_seed(cfg.seed, "train-data"));
            BooleanDataset test_set =
                generate(cfg.test_samples, cfg.dnf, derive_seed(cfg.seed, "test-data"));
            data.x_train = cfg.jitter_inputs
                               ? jitter(train_set.x, derive_seed(cfg.seed, "train-jitter"))
                               : std::move(train_set.x);
            data.x_test = cfg.jitter_inputs
                              ? jitter(test_set.x, derive_seed(cfg.seed, "test-jitter"))
                              : std::move(test_set.x);
            data.y_train = std::move(train_set.y);
            data.y_test = std::move(test_set.y);
            data.head = OutputKind::BinarySigmoid;
            data.output_dim = 1;
            break;
        }
        case TaskKind::Idx: {
            LabeledMatrixDataset train_set = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
            LabeledMatrixDataset test_set = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
            data.x_train = std::move(train_set.x);
            data.y_train = std::move(train_set.y);
            data.x_test = std::move(test_set.x);
            data.y_test = std::move(test_set.y);
            data.head = OutputKind::MulticlassLogits;
            data.output_dim = std::max(train_set.class_count, test_set.class_count);
            break;
        }
        case TaskKind::Fpee: {
            LabeledMatrixDataset train_set = load_fpee(cfg.fpee_train);
            LabeledMatrixDataset test_set = load_fpee(cfg.fpee_test);
            data.x_train = std::move(train_set.x);
            data.y_train = std::move(train_set.y);
            data.x_test = std::move(test_set.x);
            data.y_test = std::move(test_set.y);
            data.head = OutputKind::MulticlassLogits;
            data.output_dim = std::max(train_set.class_count, test_set.class_count);
            break;
        }
    }
    data.input_dim = data.x_train.cols;
    if (data.x_test.cols != data.input_dim)
        throw ConfigError("config: train/test feature dimensions disagree");
    return data;
}

PartitionStrategy strategy_for(const std::string& variant, const ExperimentConfig& cfg,
                               std::uint64_t seed) {
    PartitionStrategy s;
    s.seed = seed;
    if (variant == "clause_split") {
        s.kind = PartitionKind::ClauseAware;
        s.clause_size = cfg.dnf.clause_size;
    } else if (variant == "random_split") {
        s.kind = PartitionKind::Random;
    } else if (variant == "gram_split") {
        s.kind = PartitionKind::GramCluster;
        s.cluster_count = cfg.gram_clusters;
    } else if (variant == "structured_2_4") {
        s.kind = PartitionKind::Structured24;
    } else {
        throw ConfigError("no partition strategy for variant '" + variant + "'");
    }
    return s;
}

void write_events_file(const ExperimentConfig& cfg, const std::string& variant,
                       std::size_t trial, const TrainHistory& history) {
    std::ostringstream out;
    for (std::size_t e = 0; e < history.epoch_loss.size(); ++e) {
        nlohmann::json line;
        line["epoch"] = e + 1;
        line["loss"] = history.epoch_loss[e];
        out << line.dump() << "\n";
    }
    for (const auto& [epoch, acc] : history.test_accuracy) {
        nlohmann::json line;
        line["epoch"] = epoch;
        line["test_accuracy"] = acc;
        out << line.dump() << "\n";
    }
    for (const auto& event : history.rewire_events) {
        nlohmann::json line;
        line["epoch"] = event.epoch;
        line["rewired_positions"] = event.positions_changed;
        out << line.dump() << "\n";
    }
    const std::string path = (fs::path(cfg.out_dir) /
                              (cfg.label + "_" + variant + "_t" + std::to_string(trial) +
                               ".events.jsonl"))
                                 .string();
    atomic_write(path, out.str());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const TaskData data = load_task(cfg);

    std::vector<std::size_t> dims;
    dims.push_back(data.input_dim);
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(data.output_dim);

    InitOptions opts;
    opts.biases = cfg.biases;
    opts.layer_norm = cfg.use_layer_norm;
    opts.output_kind = data.head;

    const bool any_split = std::any_of(cfg.variants.begin(), cfg.variants.end(),
                                       [](const std::string& v) { return v != "dense"; });
    const std::size_t trials = cfg.train.trials;

    // rows_by_variant[v][t] filled trial-major, emitted variant-major.
    std::vector<std::vector<TrialRow>> rows_by_variant(cfg.variants.size(),
                                                       std::vector<TrialRow>(trials));
    std::vector<MlpModel> best_models(cfg.variants.size());
    std::vector<double> best_acc(cfg.variants.size(), -1.0);

    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = cfg.seed + t;
        const std::uint64_t shared_init = derive_seed(trial_seed, "init");

        // One pretrained snapshot per trial, shared by all split variants; its
        // shuffle stream matches the first pretrain epochs of the dense run.
        MlpModel pretrained;
        if (any_split && cfg.shared_init_seed) {
            pretrained = init_model(dims, shared_init, opts);
            if (cfg.pretrain_epochs > 0) {
                TrainConfig pre = cfg.train;
                pre.epochs = cfg.pretrain_epochs;
                pre.seed = derive_seed(trial_seed, "train");
                pre.rewire.reset();
                train(pretrained, data.x_train, data.y_train, pre);
            }
        }

        for (std::size_t v = 0; v < cfg.variants.size(); ++v) {
            const std::string& variant = cfg.variants[v];
            MlpModel model;
            TrainHistory history;
            if (variant == "dense") {
                model = init_model(dims, shared_init, opts);
                TrainConfig full = cfg.train;
                full.epochs = cfg.pretrain_epochs + cfg.train.epochs;
                full.seed = derive_seed(trial_seed, "train");
                history = train(model, data.x_train, data.y_train, full);
            } else {
                MlpModel base;
                if (cfg.shared_init_seed) {
                    base = pretrained;
                } else {
                    base = init_model(dims, derive_seed(trial_seed, "init-" + variant), opts);
                    if (cfg.pretrain_epochs > 0) {
                        TrainConfig pre = cfg.train;
                        pre.epochs = cfg.pretrain_epochs;
                        pre.seed = derive_seed(trial_seed, "train-" + variant);
                        pre.rewire.reset();
                        train(base, data.x_train, data.y_train, pre);
                    }
                }
                ExpansionPlan plan;
                plan.alpha = cfg.alpha;
                plan.strategy =
                    strategy_for(variant, cfg, derive_seed(trial_seed, "expand-" + variant));
                model = fpe_expand_model(base, plan);
                TrainConfig cont = cfg.train;
                cont.seed = derive_seed(trial_seed, "continue-" + variant);
                history = train(model, data.x_train, data.y_train, cont);
            }

            TrialRow row;
            row.variant = variant;
            row.trial = t;
            row.seed = trial_seed;
            row.accuracy = evaluate(model, data.x_test, data.y_test);
            row.nnz_weights = nonzero_weight_count(model);
            row.nnz_params = nonzero_param_count(model);
            const Matrix& w1 = model.layers.front().weights;
            row.total_capacity = total_capacity(w1);
            row.mean_cosine = mean_pairwise_cosine(w1);
            row.accuracy_per_param = row.accuracy / static_cast<double>(row.nnz_params);
            rows_by_variant[v][t] = row;

            if (cfg.write_events) write_events_file(cfg, variant, t, history);
            if (cfg.save_models && row.accuracy > best_acc[v]) {
                best_acc[v] = row.accuracy;
                best_models[v] = std::move(model);
            }
        }
    }

    ExperimentResult result;
    for (const auto& variant_rows : rows_by_variant)
        result.rows.insert(result.rows.end(), variant_rows.begin(), variant_rows.end());
    result.summaries = summarize(result.rows);

    if (cfg.save_models) {
        fs::create_directories(cfg.out_dir);
        for (std::size_t v = 0; v < cfg.variants.size(); ++v) {
            const std::string path =
                (fs::path(cfg.out_dir) / (cfg.label + "_" + cfg.variants[v] + "_best.fpemodel"))
                    .string();
            save_model(best_models[v], path);
        }
    }
    return result;
}

std::vector<VariantSummary> summarize(const std::vector<TrialRow>& rows) {
    std::vector<std::string> variant_order;
    for (const auto& row : rows)
        if (std::find(variant_order.begin(), variant_order.end(), row.variant) ==
            variant_order.end())
            variant_order.push_back(row.variant);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> dense_accs;
    for (const auto& row : rows)
        if (row.variant == "dense") dense_accs.push_back(row.accuracy);

    std::vector<VariantSummary> summaries;
    for (const auto& variant : variant_order) {
        std::vector<double> accs, caps, cosines;
        std::size_t best_trial = 0;
        double best = -1.0;
        for (const auto& row : rows) {
            if (row.variant != variant) continue;
            accs.push_back(row.accuracy);
            caps.push_back(row.total_capacity);
            cosines.push_back(row.mean_cosine);
            if (row.accuracy > best) {
                best = row.accuracy;
                best_trial = row.trial;
            }
        }
        auto mean = [](const std::vector<double>& s) {
            double total = 0.0;
            for (double v : s) total += v;
            return total / static_cast<double>(s.size());
        };
        VariantSummary summary;
        summary.variant = variant;
        summary.mean_accuracy = mean(accs);
        summary.mean_capacity = mean(caps);
        summary.mean_cosine = mean(cosines);
        summary.best_trial = best_trial;
        summary.best_accuracy = best;
        if (accs.size() >= 2) {
            double var = 0.0;
            for (double a : accs) var += (a - summary.mean_accuracy) * (a - summary.mean_accuracy);
            var /= static_cast<double>(accs.size() - 1);
            summary.stderr_accuracy = std::sqrt(var / static_cast<double>(accs.size()));
        } else {
            summary.stderr_accuracy = 0.0;
        }
        summary.relative_improvement = nan;
        summary.p_value_vs_dense = nan;
        if (variant != "dense" && !dense_accs.empty()) {
            const double dense_mean =
                std::accumulate(dense_accs.begin(), dense_accs.end(), 0.0) /
                static_cast<double>(dense_accs.size());
            if (dense_mean > 0.0)
                summary.relative_improvement = (summary.mean_accuracy - dense_mean) / dense_mean;
            if (accs.size() >= 2 && dense_accs.size() >= 2) {
                try {
                    summary.p_value_vs_dense = welch_t_test(accs, dense_accs).p_two_sided;
                } catch (const std::invalid_argument&) {
                    // degenerate samples: leave NaN
                }
            }
        }
        summaries.push_back(std::move(summary));
    }
    return summaries;
}

std::string trial_csv_text(const std::vector<TrialRow>& rows) {
    std::ostringstream out;
    out << "# fpe-trials-v1\n";
    out << "variant,trial,seed,accuracy,nnz_weights,nnz_params,total_capacity,"
           "mean_cosine,accuracy_per_param\n";
    for (const auto& row : rows) {
        out << row.variant << ',' << row.trial << ',' << row.seed << ','
            << format_double(row.accuracy) << ',' << row.nnz_weights << ',' << row.nnz_params
            << ',' << format_double(row.total_capacity) << ',' << format_double(row.mean_cosine)
            << ',' << format_double(row.accuracy_per_param) << '\n';
    }
    return out.str();
}

std::vector<TrialRow> parse_trial_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<TrialRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("variant,", 0) == 0) continue;
        std::istringstream cells(line);
        std::string cell;
        TrialRow row;
        auto next = [&]() {
            if (!std::getline(cells, cell, ','))
                throw FormatError("trial csv: short row: " + line);
            return cell;
        };
        row.variant = next();
        row.trial = std::stoull(next());
        row.seed = std::stoull(next());
        row.accuracy = std::stod(next());
        row.nnz_weights = std::stoull(next());
        row.nnz_params = std::stoull(next());
        row.total_capacity = std::stod(next());
        row.mean_cosine = std::stod(next());
        row.accuracy_per_param = std::stod(next());
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

nlohmann::json summary_to_json(const VariantSummary& s) {
    nlohmann::json j;
    j["variant"] = s.variant;
    j["mean_accuracy"] = s.mean_accuracy;
    j["stderr_accuracy"] = s.stderr_accuracy;
    j["mean_total_capacity"] = s.mean_capacity;
    j["mean_cosine"] = s.mean_cosine;
    if (std::isfinite(s.relative_improvement))
        j["relative_improvement"] = s.relative_improvement;
    else
        j["relative_improvement"] = nullptr;
    if (std::isfinite(s.p_value_vs_dense))
        j["p_value_vs_dense"] = s.p_value_vs_dense;
    else
        j["p_value_vs_dense"] = nullptr;
    j["best_trial"] = s.best_trial;
    j["best_accuracy"] = s.best_accuracy;
    return j;
}

}  // namespace

std::string write_experiment_outputs(const ExperimentConfig& cfg,
                                     const ExperimentResult& result) {
    fs::create_directories(cfg.out_dir);
    const std::string csv_path =
        (fs::path(cfg.out_dir) / (cfg.label + "_trials.csv")).string();
    atomic_write(csv_path, trial_csv_text(result.rows));

    nlohmann::json aggregate;
    aggregate["schema"] = "fpe-aggregate-v1";
    aggregate["config"] = config_to_json(cfg);
    aggregate["variants"] = nlohmann::json::array();
    for (const auto& summary : result.summaries)
        aggregate["variants"].push_back(summary_to_json(summary));
    const std::string json_path =
        (fs::path(cfg.out_dir) / (cfg.label + "_aggregate.json")).string();
    atomic_write(json_path, aggregate.dump(2) + "\n");
    return csv_path;
}

namespace {

TaskKind task_from_string(const std::string& s) {
    if (s == "dnf") return TaskKind::Dnf;
    if (s == "idx") return TaskKind::Idx;
    if (s == "fpee") return TaskKind::Fpee;
    throw ConfigError("config: unknown task kind '" + s + "'");
}

std::string task_to_string(TaskKind task) {
    switch (task) {
        case TaskKind::Dnf: return "dnf";
        case TaskKind::Idx: return "idx";
        case TaskKind::Fpee: return "fpee";
    }
    return "dnf";
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("task")) {
            const auto& task = j.at("task");
            cfg.task = task_from_string(task.value("kind", "dnf"));
            if (cfg.task == TaskKind::Dnf) {
                cfg.dnf.num_literals = task.value("m", cfg.dnf.num_literals);
                cfg.dnf.clause_size = task.value("k", cfg.dnf.clause_size);
                cfg.train_samples = task.value("train_samples", cfg.train_samples);
                cfg.test_samples = task.value("test_samples", cfg.test_samples);
                cfg.jitter_inputs = task.value("jitter", cfg.jitter_inputs);
            } else if (cfg.task == TaskKind::Idx) {
                cfg.idx_train_images = task.at("train_images").get<std::string>();
                cfg.idx_train_labels = task.at("train_labels").get<std::string>();
                cfg.idx_test_images = task.at("test_images").get<std::string>();
                cfg.idx_test_labels = task.at("test_labels").get<std::string>();
            } else {
                cfg.fpee_train = task.at("train").get<std::string>();
                cfg.fpee_test = task.at("test").get<std::string>();
            }
        }
        if (j.contains("model")) {
            const auto& model = j.at("model");
            if (model.contains("hidden"))
                cfg.hidden = model.at("hidden").get<std::vector<std::size_t>>();
            cfg.use_layer_norm = model.value("layer_norm", cfg.use_layer_norm);
            cfg.biases = model.value("biases", cfg.biases);
        }
        if (j.contains("train")) {
            const auto& train = j.at("train");
            cfg.train.learning_rate = train.value("learning_rate", cfg.train.learning_rate);
            cfg.train.batch_size = train.value("batch_size", cfg.train.batch_size);
            cfg.train.epochs = train.value("epochs", cfg.train.epochs);
            cfg.train.warmup = train.value("warmup", cfg.train.warmup);
            cfg.train.lambda_l1 = train.value("lambda_l1", cfg.train.lambda_l1);
            cfg.train.lambda_l2 = train.value("lambda_l2", cfg.train.lambda_l2);
            cfg.train.lambda_orth = train.value("lambda_orth", cfg.train.lambda_orth);
            cfg.train.ramp_regularizers =
                train.value("ramp_regularizers", cfg.train.ramp_regularizers);
            if (train.contains("rewire") && !train.at("rewire").is_null()) {
                RewireConfig rewire;
                rewire.period = train.at("rewire").value("period", 0ull);
                rewire.fraction = train.at("rewire").value("fraction", 0.0);
                cfg.train.rewire = rewire;
            }
        }
        cfg.train.trials = j.value("trials", cfg.train.trials);
        cfg.pretrain_epochs = j.value("pretrain_epochs", cfg.pretrain_epochs);
        if (j.contains("expansion")) {
            cfg.alpha = j.at("expansion").value("alpha", cfg.alpha);
            cfg.gram_clusters = j.at("expansion").value("gram_clusters", cfg.gram_clusters);
        }
        if (j.contains("variants"))
            cfg.variants = j.at("variants").get<std::vector<std::string>>();
        cfg.shared_init_seed = j.value("shared_init_seed", cfg.shared_init_seed);
        if (j.contains("output")) {
            const auto& output = j.at("output");
            cfg.out_dir = output.value("dir", cfg.out_dir);
            cfg.label = output.value("label", cfg.label);
            cfg.save_models = output.value("save_models", cfg.save_models);
            cfg.write_events = output.value("events", cfg.write_events);
        }
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["schema"] = "fpe-config-v1";
    nlohmann::json task;
    task["kind"] = task_to_string(cfg.task);
    if (cfg.task == TaskKind::Dnf) {
        task["m"] = cfg.dnf.num_literals;
        task["k"] = cfg.dnf.clause_size;
        task["train_samples"] = cfg.train_samples;
        task["test_samples"] = cfg.test_samples;
        task["jitter"] = cfg.jitter_inputs;
    } else if (cfg.task == TaskKind::Idx) {
        task["train_images"] = cfg.idx_train_images;
        task["train_labels"] = cfg.idx_train_labels;
        task["test_images"] = cfg.idx_test_images;
        task["test_labels"] = cfg.idx_test_labels;
    } else {
        task["train"] = cfg.fpee_train;
        task["test"] = cfg.fpee_test;
    }
    j["task"] = task;
    j["model"] = {{"hidden", cfg.hidden},
                  {"layer_norm", cfg.use_layer_norm},
                  {"biases", cfg.biases}};
    nlohmann::json train;
    train["learning_rate"] = cfg.train.learning_rate;
    train["batch_size"] = cfg.train.batch_size;
    train["epochs"] = cfg.train.epochs;
    train["warmup"] = cfg.train.warmup;
    train["lambda_l1"] = cfg.train.lambda_l1;
    train["lambda_l2"] = cfg.train.lambda_l2;
    train["lambda_orth"] = cfg.train.lambda_orth;
    train["ramp_regularizers"] = cfg.train.ramp_regularizers;
    if (cfg.train.rewire)
        train["rewire"] = {{"period", cfg.train.rewire->period},
                           {"fraction", cfg.train.rewire->fraction}};
    j["train"] = train;
    j["trials"] = cfg.train.trials;
    j["pretrain_epochs"] = cfg.pretrain_epochs;
    j["expansion"] = {{"alpha", cfg.alpha}, {"gram_clusters", cfg.gram_clusters}};
    j["variants"] = cfg.variants;
    j["shared_init_seed"] = cfg.shared_init_seed;
    j["output"] = {{"dir", cfg.out_dir},
                   {"label", cfg.label},
                   {"save_models", cfg.save_models},
                   {"events", cfg.write_events}};
    j["seed"] = cfg.seed;
    return j;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
    SweepConfig cfg;
    cfg.base = config_from_json(j);
    if (!j.contains("sweep")) throw ConfigError("config: sweep axes missing");
    const auto& sweep = j.at("sweep");
    try {
        if (sweep.contains("neurons"))
            cfg.axes.neurons = sweep.at("neurons").get<std::vector<std::size_t>>();
        if (sweep.contains("clauses"))
            cfg.axes.clauses = sweep.at("clauses").get<std::vector<std::size_t>>();
        if (sweep.contains("alphas"))
            cfg.axes.alphas = sweep.at("alphas").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: sweep axes: ") + e.what());
    }
    if (cfg.axes.neurons.empty() || cfg.axes.clauses.empty())
        throw ConfigError("config: sweep needs nonempty neurons and clauses axes");
    if (cfg.axes.alphas.empty()) cfg.axes.alphas = {cfg.base.alpha};
    if (cfg.base.task != TaskKind::Dnf)
        throw ConfigError("config: sweeps are defined for the dnf task");
    return cfg;
}

void run_sweep(const SweepConfig& cfg) {
    struct Cell {
        std::size_t neurons, clauses, alpha;
        std::vector<TrialRow> rows;
    };
    std::vector<Cell> cells;
    fs::create_directories(cfg.base.out_dir);
    for (std::size_t h : cfg.axes.neurons) {
        for (std::size_t c : cfg.axes.clauses) {
            for (std::size_t a : cfg.axes.alphas) {
                ExperimentConfig cell_cfg = cfg.base;
                cell_cfg.hidden = {h};
                cell_cfg.dnf.num_literals = c * cfg.base.dnf.clause_size;
                cell_cfg.alpha = a;
                cell_cfg.label = cfg.base.label + "_h" + std::to_string(h) + "_c" +
                                 std::to_string(c) + "_a" + std::to_string(a);
                const std::string csv_path =
                    (fs::path(cell_cfg.out_dir) / (cell_cfg.label + "_trials.csv")).string();
                Cell cell{h, c, a, {}};
                if (fs::exists(csv_path)) {
                    // Completed cell: reuse its rows so interrupted sweeps resume.
                    std::ifstream in(csv_path);
                    std::stringstream buffer;
                    buffer << in.rdbuf();
                    cell.rows = parse_trial_csv(buffer.str());
                } else {
                    const ExperimentResult result = run_experiment(cell_cfg);
                    write_experiment_outputs(cell_cfg, result);
                    cell.rows = result.rows;
                }
                cells.push_back(std::move(cell));
            }
        }
    }

    // Long-format CSV over all cells.
    std::ostringstream long_csv;
    long_csv << "# fpe-sweep-v1\n";
    long_csv << "neurons,clauses,alpha,variant,mean_accuracy,stderr_accuracy,"
                "mean_total_capacity,mean_cosine,relative_improvement,p_value_vs_dense\n";
    for (const auto& cell : cells) {
        for (const auto& summary : summarize(cell.rows)) {
            long_csv << cell.neurons << ',' << cell.clauses << ',' << cell.alpha << ','
                     << summary.variant << ',' << format_double(summary.mean_accuracy) << ','
                     << format_double(summary.stderr_accuracy) << ','
                     << format_double(summary.mean_capacity) << ','
                     << format_double(summary.mean_cosine) << ','
                     << format_double(summary.relative_improvement) << ','
                     << format_double(summary.p_value_vs_dense) << '\n';
        }
    }
    atomic_write((fs::path(cfg.base.out_dir) / (cfg.base.label + "_sweep.csv")).string(),
                 long_csv.str());

    // One heatmap-ready pivot of relative improvement per (variant, alpha).
    for (const auto& variant : cfg.base.variants) {
        if (variant == "dense") continue;
        for (std::size_t a : cfg.axes.alphas) {
            std::ostringstream pivot;
            pivot << "# fpe-pivot-v1 relative_improvement variant=" << variant
                  << " alpha=" << a << "\n";
            pivot << "neurons\\clauses";
            for (std::size_t c : cfg.axes.clauses) pivot << ',' << c;
            pivot << '\n';
            for (std::size_t h : cfg.axes.neurons) {
                pivot << h;
                for (std::size_t c : cfg.axes.clauses) {
                    double value = std::numeric_limits<double>::quiet_NaN();
                    for (const auto& cell : cells) {
                        if (cell.neurons != h || cell.clauses != c || cell.alpha != a) continue;
                        for (const auto& summary : summarize(cell.rows))
                            if (summary.variant == variant) value = summary.relative_improvement;
                    }
                    pivot << ',' << format_double(value);
                }
                pivot << '\n';
            }
            atomic_write((fs::path(cfg.base.out_dir) /
                          (cfg.base.label + "_pivot_" + variant + "_a" + std::to_string(a) +
                           ".csv"))
                             .string(),
                         pivot.str());
        }
    }
}

}  // namespace fpe
