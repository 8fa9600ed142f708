#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "fpe/data_io.hpp"
#include "fpe/dnf_gen.hpp"
#include "fpe/errors.hpp"
#include "fpe/experiment.hpp"
#include "fpe/interference_metrics.hpp"
#include "fpe/masked_net.hpp"
#include "fpe/rng.hpp"
#include "fpe/theory_bounds.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_gen_data(std::size_t m, std::size_t k, std::size_t n, std::uint64_t seed,
                 bool jitter_flag, const std::string& out_prefix) {
    fpe::DnfSpec spec{m, k};
    fpe::BooleanDataset ds = fpe::generate(n, spec, seed);
    fpe::LabeledMatrixDataset out;
    out.x = jitter_flag ? fpe::jitter(ds.x, fpe::derive_seed(seed, "jitter")) : ds.x;
    out.y = ds.y;
    out.class_count = 2;
    out.source = "dnf";
    const std::string data_path = out_prefix + ".fpee";
    fpe::save_fpee(out, data_path);

    nlohmann::json sidecar;
    sidecar["schema"] = "fpe-dataset-v1";
    sidecar["n"] = n;
    sidecar["m"] = m;
    sidecar["k"] = k;
    sidecar["num_clauses"] = spec.num_clauses();
    sidecar["seed"] = seed;
    sidecar["jitter"] = jitter_flag;
    sidecar["class_count"] = 2;
    sidecar["positives"] = n / 2;
    std::ofstream side(out_prefix + ".json");
    side << sidecar.dump(2) << "\n";
    std::cout << "wrote " << data_path << " and " << out_prefix << ".json\n";
    return 0;
}

int cmd_theory(std::size_t m, std::size_t k, std::size_t alpha, std::size_t r,
               std::optional<std::size_t> d_override, double epsilon,
               std::size_t mc_trials, std::uint64_t seed) {
    fpe::TheoryParams params;
    params.num_literals = m;
    params.clause_size = k;
    params.num_clauses = m / k;
    params.dense_neurons = r;
    params.alpha = alpha;
    params.degree = d_override.value_or(0);
    params.epsilon = epsilon;
    const std::size_t d = params.effective_degree();
    params.validate();

    const fpe::ExactProb p = fpe::coverage_prob_exact(m, k, d);
    const fpe::ExactProb p_prime = fpe::pair_collision_prob_exact(m, k, d);
    const double bound = fpe::coverage_lower_bound(p.value, alpha, r, params.num_clauses);
    const auto expectations =
        fpe::expected_collisions(r, params.num_clauses, alpha, p_prime.value);

    std::printf("m=%zu k=%zu C=%zu r=%zu alpha=%zu d=%zu\n", m, k, params.num_clauses, r,
                alpha, d);
    std::printf("%-34s %s / %s = %.10g\n", "coverage p (exact)", p.numerator.c_str(),
                p.denominator.c_str(), p.value);
    std::printf("%-34s %.10g\n", "coverage p approx (1/alpha)^k",
                fpe::coverage_prob_approx(alpha, k));
    std::printf("%-34s %.10g\n", "coverage lower bound", bound);
    std::printf("%-34s %.10g\n", "min r for coverage @ epsilon",
                fpe::min_neurons_for_coverage(alpha, k, params.num_clauses, epsilon));
    std::printf("%-34s %s / %s = %.10g\n", "collision p' (exact)", p_prime.numerator.c_str(),
                p_prime.denominator.c_str(), p_prime.value);
    std::printf("%-34s %.10g\n", "interference ratio alpha*p'",
                fpe::interference_ratio(alpha, p_prime.value));
    std::printf("%-34s %.10g\n", "interference ratio approx",
                fpe::approx_interference_ratio(alpha, k));
    std::printf("%-34s %.10g\n", "E_dense collisions", expectations.dense);
    std::printf("%-34s %.10g\n", "E_FPE collisions", expectations.fpe);
    if (mc_trials > 0) {
        const fpe::MonteCarloResult mc = fpe::monte_carlo(params, mc_trials, seed);
        std::printf("%-34s %.6g (se %.3g, %zu trials)\n", "MC all-clause coverage rate",
                    mc.coverage_all_rate, mc.coverage_all_se, mc.trials);
        std::printf("%-34s %.6g (se %.3g)\n", "MC mean collisions", mc.mean_collisions,
                    mc.collisions_se);
        std::printf("%-34s %.6g (se %.3g)\n", "MC per-clause miss rate", mc.clause_miss_rate,
                    mc.clause_miss_se);
    }
    return 0;
}

int cmd_metrics(const std::string& model_path, const std::string& out_path,
                const std::string& gram_csv, std::size_t clause_size) {
    const fpe::MlpModel model = fpe::load_model(model_path);
    const fpe::Matrix& w1 = model.layers.front().weights;
    const std::vector<double> capacity = fpe::feature_capacity(w1);
    const fpe::Matrix gram = fpe::gram_matrix(w1);

    nlohmann::json report;
    report["schema"] = "fpe-metrics-v1";
    report["model"] = model_path;
    report["dims"] = model.dims();
    report["nnz_weights"] = fpe::nonzero_weight_count(model);
    report["nnz_params"] = fpe::nonzero_param_count(model);
    report["total_capacity"] = fpe::total_capacity(w1);
    report["per_feature_capacity"] = capacity;
    report["mean_cosine"] = fpe::mean_pairwise_cosine(w1);
    if (clause_size > 0 && w1.cols % clause_size == 0)
        report["clause_capacity"] = fpe::clause_capacity(capacity, clause_size);

    // Active-weight map of the first layer ("x" marks a masked slot).
    const fpe::Matrix& mask = model.layers.front().mask;
    std::vector<std::string> mask_rows;
    for (std::size_t i = 0; i < mask.rows; ++i) {
        std::string row;
        for (std::size_t j = 0; j < mask.cols; ++j)
            row.push_back(mask(i, j) != 0.0 ? '1' : 'x');
        mask_rows.push_back(std::move(row));
    }
    report["w1_mask_map"] = mask_rows;

    std::ofstream out(out_path);
    if (!out) throw fpe::FormatError("cannot open for writing: " + out_path);
    out << report.dump(2) << "\n";

    if (!gram_csv.empty()) {
        std::ofstream gout(gram_csv);
        if (!gout) throw fpe::FormatError("cannot open for writing: " + gram_csv);
        gout << "# fpe-gram-v1\n";
        for (std::size_t i = 0; i < gram.rows; ++i) {
            for (std::size_t j = 0; j < gram.cols; ++j) {
                if (j) gout << ',';
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", gram(i, j));
                gout << buf;
            }
            gout << '\n';
        }
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fpe::ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw fpe::ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed Parameter Expansion experiments"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a Boolean-DNF dataset file");
    std::size_t gen_m = 32, gen_k = 4, gen_n = 10000;
    std::uint64_t gen_seed = 0;
    bool gen_jitter = false;
    std::string gen_out = "dnf_data";
    gen->add_option("--m", gen_m, "total literals")->required();
    gen->add_option("--k", gen_k, "literals per clause")->required();
    gen->add_option("--n", gen_n, "total samples")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_flag("--jitter", gen_jitter, "map bits to [3,3.5] / [0,0.5]");
    gen->add_option("--out", gen_out, "output path prefix");

    // run
    auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
    std::string run_config;
    std::string run_out_dir, run_label;
    run->add_option("--config", run_config, "config file")->required();
    run->add_option("--out-dir", run_out_dir, "override output directory");
    run->add_option("--label", run_label, "override output label");
    std::uint64_t run_seed_value = 0;
    auto* run_seed_opt = run->add_option("--seed", run_seed_value, "override seed");
    std::size_t run_trials_value = 0;
    auto* run_trials_opt = run->add_option("--trials", run_trials_value, "override trials");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a (neurons x clauses x alpha) sweep");
    std::string sweep_config;
    sweep->add_option("--config", sweep_config, "config file with sweep axes")->required();

    // theory
    auto* theory = app.add_subcommand("theory", "Print coverage/collision theory table");
    std::size_t th_m = 32, th_k = 4, th_alpha = 2, th_r = 8, th_mc = 0;
    std::optional<std::size_t> th_d;
    double th_eps = 0.01;
    std::uint64_t th_seed = 0;
    theory->add_option("--m", th_m, "total literals")->required();
    theory->add_option("--k", th_k, "literals per clause")->required();
    theory->add_option("--alpha", th_alpha, "expansion factor")->required();
    theory->add_option("--r", th_r, "dense neuron count")->required();
    std::size_t th_d_value = 0;
    auto* th_d_opt = theory->add_option("--d", th_d_value, "sparse degree (default m/alpha)");
    theory->add_option("--epsilon", th_eps, "coverage tolerance");
    theory->add_option("--mc-trials", th_mc, "Monte-Carlo trials (0 disables)");
    theory->add_option("--seed", th_seed, "Monte-Carlo seed");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Interference metrics for a checkpoint");
    std::string metrics_model, metrics_out = "metrics.json", metrics_gram;
    std::size_t metrics_k = 0;
    metrics->add_option("--model", metrics_model, "model checkpoint")->required();
    metrics->add_option("--out", metrics_out, "report JSON path");
    metrics->add_option("--gram-csv", metrics_gram, "also write the Gram matrix as CSV");
    metrics->add_option("--clause-size", metrics_k, "clause size for per-clause capacity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_m, gen_k, gen_n, gen_seed, gen_jitter, gen_out);
        if (run->parsed()) {
            fpe::ExperimentConfig cfg = fpe::load_config_file(run_config);
            if (!run_out_dir.empty()) cfg.out_dir = run_out_dir;
            if (!run_label.empty()) cfg.label = run_label;
            if (run_seed_opt->count()) cfg.seed = run_seed_value;
            if (run_trials_opt->count()) cfg.train.trials = run_trials_value;
            const fpe::ExperimentResult result = fpe::run_experiment(cfg);
            const std::string csv = fpe::write_experiment_outputs(cfg, result);
            std::cout << "wrote " << csv << "\n";
            for (const auto& summary : result.summaries) {
                std::printf("%-16s mean acc %.4f +/- %.4f", summary.variant.c_str(),
                            summary.mean_accuracy, summary.stderr_accuracy);
                if (std::isfinite(summary.relative_improvement))
                    std::printf("  rel improvement %+.4f", summary.relative_improvement);
                std::printf("\n");
            }
            return 0;
        }
        if (sweep->parsed()) {
            const fpe::SweepConfig cfg = fpe::sweep_config_from_json(read_json_file(sweep_config));
            fpe::run_sweep(cfg);
            std::cout << "sweep outputs under " << cfg.base.out_dir << "\n";
            return 0;
        }
        if (theory->parsed()) {
            if (th_d_opt->count()) th_d = th_d_value;
            return cmd_theory(th_m, th_k, th_alpha, th_r, th_d, th_eps, th_mc, th_seed);
        }
        if (metrics->parsed())
            return cmd_metrics(metrics_model, metrics_out, metrics_gram, metrics_k);
    } catch (const fpe::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fpe::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const fpe::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
