// rigamp CLI: instance generation, single solves, SE sweeps, spectrum
// analysis, experiment sweeps, and timing benchmarks.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rigamp/harness.hpp"

using namespace rigamp;

namespace {

struct CommonProblem {
    std::string prior = "rademacher";
    std::string channel = "linear";
    double delta = 1.0;
    double sigma = 0.1;
    int d = 2000;
    std::uint64_t seed = 1;
    std::string spectrum = "beta";
    std::string design = "structured";

    void attach(CLI::App* app) {
        app->add_option("--prior", prior, "Signal prior: rademacher|gaussian|bernoulli-gaussian");
        app->add_option("--channel", channel, "Observation channel: linear|one-bit");
        app->add_option("--delta", delta, "Aspect ratio n/d");
        app->add_option("--sigma", sigma, "Linear-channel noise std");
        app->add_option("--d", d, "Signal dimension");
        app->add_option("--seed", seed, "Base seed");
        app->add_option("--spectrum", spectrum, "Singular-value law: beta|gaussian");
        app->add_option("--design", design, "Design realization: structured|dense|gaussian");
    }

    GLMInstance instance() const {
        PriorSpec p = prior_from_name(prior);
        ChannelSpec c = channel_from_name(channel, channel == "linear" ? sigma : 0.0);
        DesignSpec ds;
        if (spectrum == "gaussian" || design == "gaussian") {
            ds.variant = DesignSpec::Variant::IidGaussian;
            ds.law = DesignSpec::SingularLaw::MarchenkoPasturViaGaussian;
        } else if (design == "dense") {
            ds.variant = DesignSpec::Variant::ExplicitDense;
        } else {
            ds.variant = DesignSpec::Variant::Structured;
        }
        int n = std::max(1, static_cast<int>(std::lround(delta * d)));
        return generate_instance(p, c, ds, n, d, seed);
    }

    CumulantSet cumulants(int max_iters) const {
        int K = 2 * max_iters + 6;
        if (spectrum == "beta") return beta_reference_cumulants(K, delta);
        if (spectrum == "gaussian") return gaussian_design_cumulants(K, delta);
        throw std::invalid_argument("unknown spectrum: " + spectrum);
    }
};

int cmd_gen(const CommonProblem& prob, const std::string& prefix) {
    GLMInstance inst = prob.instance();
    save_matrix(prefix + ".A.mx", materialize(*inst.design));
    save_matrix(prefix + ".xstar.mx", inst.x_star);
    save_matrix(prefix + ".y.mx", inst.y);
    nlohmann::json meta{{"prior", prob.prior},   {"channel", prob.channel},
                        {"delta", prob.delta},   {"sigma", prob.sigma},
                        {"d", prob.d},           {"n", inst.n()},
                        {"seed", prob.seed},     {"spectrum", prob.spectrum},
                        {"design", prob.design}};
    std::ofstream(prefix + ".meta.json") << meta.dump(2) << "\n";
    std::printf("wrote %s.{A,xstar,y}.mx and %s.meta.json\n", prefix.c_str(), prefix.c_str());
    return 0;
}

int cmd_run(const CommonProblem& prob, const std::string& algo, int max_iters,
            bool with_aux_oracle, const std::string& out_path) {
    GLMInstance inst = prob.instance();
    CumulantSet cum = prob.cumulants(max_iters);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        out = &file;
    }

    if (algo == "lmmse" || algo == "subgradient") {
        auto [xhat, iters] = run_algorithm(algo, inst, cum, max_iters, prob.seed);
        Metrics m = compute_metrics(xhat, inst.x_star);
        *out << "# schema: rigamp-run-v1\n"
             << "iteration,corr,mse,cond_omega,cond_sigma,wall_ms\n"
             << iters << ',' << m.corr << ',' << m.mse << ",,,\n";
        return 0;
    }

    RigampOptions opts;
    opts.t_max = max_iters;
    RigampResult res =
        algo == "gamp" ? gamp_run(inst, cum, opts) : rigamp_run(inst, cum, opts);

    ClosenessGaps gaps;
    if (with_aux_oracle) {
        auto states = se_run(prior_from_name(prob.prior),
                             channel_from_name(prob.channel,
                                               prob.channel == "linear" ? prob.sigma : 0.0),
                             cum, inst.delta(), max_iters + 1);
        AuxHistory aux = aux_amp_run(inst, cum, states, max_iters + 1);
        gaps = closeness_report(res.history, aux, inst, states);
    }

    *out << "# schema: rigamp-run-v1\n"
         << "iteration,corr,mse,cond_omega,cond_sigma,wall_ms";
    if (with_aux_oracle) *out << ",gap_x,gap_xhat,gap_r,gap_s";
    *out << "\n";
    for (std::size_t i = 0; i < res.diag.size(); ++i) {
        const auto& dg = res.diag[i];
        *out << dg.t << ',' << dg.corr << ',' << dg.mse << ',' << dg.cond_omega << ','
             << dg.cond_sigma << ',' << dg.wall_ms;
        if (with_aux_oracle) {
            auto cell = [&](const std::vector<double>& v) {
                if (i < v.size()) *out << ',' << v[i];
                else *out << ',';
            };
            cell(gaps.x);
            cell(gaps.xhat);
            cell(gaps.r);
            cell(gaps.s);
        }
        *out << "\n";
    }
    std::fprintf(stderr, "termination: %s after %d iterations\n", res.termination.c_str(),
                 res.iterations);
    return 0;
}

int cmd_se(const CommonProblem& prob, int max_iters, const std::string& out_path) {
    CumulantSet cum = prob.cumulants(max_iters);
    PriorSpec prior = prior_from_name(prob.prior);
    ChannelSpec chan =
        channel_from_name(prob.channel, prob.channel == "linear" ? prob.sigma : 0.0);
    auto states = se_run(prior, chan, cum, prob.delta, max_iters);
    SEPrediction pred = se_predict_metrics(states.back(), prior);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        out = &file;
    }
    const SEState& last = states.back();
    *out << "# schema: rigamp-se-v1\n"
         << "t,mu_t,omega_tt,sigma_tt,corr_pred,mse_pred\n";
    for (int t = 1; t <= last.t; ++t)
        *out << t << ',' << last.mu[t - 1] << ',' << last.omega(t - 1, t - 1) << ','
             << last.sigma(t - 1, t - 1) << ',' << pred.corr_xhat[t - 1] << ','
             << pred.mse[t - 1] << "\n";
    return 0;
}

int cmd_cumulants(const CommonProblem& prob, const std::string& matrix_path, int orders,
                  int probes, const std::string& normalizer, const std::string& out_path) {
    CumulantSet cs;
    if (!matrix_path.empty()) {
        DenseDesign design(load_matrix(matrix_path));
        Rng rng = make_rng(prob.seed);
        MomentEstimatorOptions mopt;
        mopt.probes = probes;
        mopt.normalize_by_n = normalizer != "d";
        cs = estimate_cumulants(design, orders, rng, mopt);
    } else if (prob.spectrum == "beta") {
        cs = beta_reference_cumulants(orders, prob.delta);
    } else if (prob.spectrum == "gaussian") {
        GLMInstance inst = prob.instance();
        Rng rng = make_rng(hash_combine(prob.seed, 0xE57));
        MomentEstimatorOptions mopt;
        mopt.probes = probes;
        mopt.normalize_by_n = normalizer != "d";
        cs = estimate_cumulants(*inst.design, orders, rng, mopt);
    } else {
        throw std::invalid_argument("unknown spectrum: " + prob.spectrum);
    }
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        out = &file;
    }
    *out << cs.to_json().dump(2) << "\n";
    return 0;
}

int cmd_bench(const std::vector<int>& dims, const std::vector<double>& deltas,
              std::uint64_t seed, const std::string& out_path) {
    auto rows = timing_benchmark(dims, deltas, seed);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        out = &file;
    }
    write_timing_csv(rows, *out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RI-GAMP: rotationally invariant generalized AMP for GLMs"};
    app.require_subcommand(1);

    CommonProblem prob;
    std::string prefix = "instance", algo = "rigamp", out_path, matrix_path, normalizer = "n";
    std::string config_path;
    int max_iters = 10, orders = 10, probes = 32;
    bool with_aux = false;
    std::vector<int> dims{500, 1000, 2000};
    std::vector<double> deltas{1.0};

    auto* gen = app.add_subcommand("gen", "Generate an instance and write it to disk");
    prob.attach(gen);
    gen->add_option("--output-prefix", prefix, "Output file prefix");

    auto* run = app.add_subcommand("run", "Solve a single instance");
    prob.attach(run);
    run->add_option("--algo", algo, "rigamp|gamp|lmmse|subgradient");
    run->add_option("--max-iters", max_iters, "Iteration cap");
    run->add_flag("--with-aux-oracle", with_aux,
                  "Append auxiliary-AMP gap columns to the diagnostics CSV");
    run->add_option("--output", out_path, "CSV output path (default stdout)");

    auto* se = app.add_subcommand("se", "State-evolution-only sweep");
    prob.attach(se);
    se->add_option("--max-iters", max_iters, "Iterations to predict");
    se->add_option("--output", out_path, "CSV output path (default stdout)");

    auto* cum = app.add_subcommand("cumulants", "Moment/cumulant analysis of a spectrum");
    prob.attach(cum);
    cum->add_option("--matrix", matrix_path, "RIGAMPMX matrix file to analyze");
    cum->add_option("--orders", orders, "Number of even orders K");
    cum->add_option("--probes", probes, "Probe vectors for estimation");
    cum->add_option("--moment-normalizer", normalizer, "Normalize ||s^k||^2 by n or d")
        ->check(CLI::IsMember({"n", "d"}));
    cum->add_option("--output", out_path, "JSON output path (default stdout)");

    auto* exp = app.add_subcommand("experiment", "Run a sweep described by a config file");
    exp->add_option("config", config_path, "Path to key = value config")->required();

    auto* bench = app.add_subcommand("bench", "Timing benchmark (cumulants vs SVD)");
    bench->add_option("--dims", dims, "Dimensions d to benchmark");
    bench->add_option("--deltas", deltas, "Aspect ratios");
    bench->add_option("--seed", prob.seed, "Seed");
    bench->add_option("--output", out_path, "CSV output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(prob, prefix);
        if (run->parsed()) return cmd_run(prob, algo, max_iters, with_aux, out_path);
        if (se->parsed()) return cmd_se(prob, max_iters, out_path);
        if (cum->parsed())
            return cmd_cumulants(prob, matrix_path, orders, probes, normalizer, out_path);
        if (exp->parsed()) {
            ExperimentConfig cfg = load_experiment_config(config_path);
            if (cfg.type == "timing") {
                std::vector<int> bdims(cfg.dims.begin(), cfg.dims.end());
                auto rows = timing_benchmark(bdims, cfg.delta_grid, cfg.seed);
                std::ofstream f(cfg.output_path + ".csv");
                write_timing_csv(rows, f);
            } else {
                run_experiment(cfg);
            }
            std::printf("wrote %s.csv\n", cfg.output_path.c_str());
            return 0;
        }
        if (bench->parsed()) return cmd_bench(dims, deltas, prob.seed, out_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
