#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigamp/aux_amp.hpp"
#include "rigamp/baselines.hpp"
#include "rigamp/rigamp.hpp"
#include "rigamp/state_evolution.hpp"

namespace rigamp {

// ---- metrics ----

struct Metrics {
    double corr = 0.0;  // <xhat, x*>^2 / (||xhat||^2 ||x*||^2), 0 when ||xhat|| = 0
    double mse = 0.0;   // ||xhat - x*||^2 / d
};

inline Metrics compute_metrics(const VectorXd& xhat, const VectorXd& x_star) {
    if (xhat.size() != x_star.size()) throw std::invalid_argument("metric length mismatch");
    Metrics m;
    m.corr = normalized_sq_correlation(xhat, x_star);
    m.mse = (xhat - x_star).squaredNorm() / x_star.size();
    return m;
}

// ---- experiment configuration (key = value text files) ----

struct ExperimentConfig {
    std::string name;
    std::string type = "sweep";        // sweep | timing
    std::string sweep_axis = "iteration";  // iteration | sigma | delta
    std::vector<double> grid;
    std::string series_axis = "none";  // none | sigma | delta
    std::vector<double> series;
    int trials = 10;
    int d = 2000;
    double delta = 1.0;
    double sigma = 0.0;
    std::string prior = "rademacher";
    std::string channel = "linear";
    std::string spectrum = "beta";     // beta | gaussian
    std::string design = "structured";  // structured | dense | gaussian
    std::vector<std::string> algorithms{"rigamp"};
    std::uint64_t seed = 1;
    int max_iters = 10;
    std::string output_path;
    // timing type only:
    std::vector<double> dims;
    std::vector<double> delta_grid{1.0};
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) out.push_back(std::stod(tok));
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key == "name") cfg.name = val;
        else if (key == "type") cfg.type = val;
        else if (key == "sweep-axis") cfg.sweep_axis = val;
        else if (key == "grid") cfg.grid = detail::parse_doubles(val);
        else if (key == "series-axis") cfg.series_axis = val;
        else if (key == "series") cfg.series = detail::parse_doubles(val);
        else if (key == "trials") cfg.trials = std::stoi(val);
        else if (key == "d") cfg.d = std::stoi(val);
        else if (key == "delta") cfg.delta = std::stod(val);
        else if (key == "sigma") cfg.sigma = std::stod(val);
        else if (key == "prior") cfg.prior = val;
        else if (key == "channel") cfg.channel = val;
        else if (key == "spectrum") cfg.spectrum = val;
        else if (key == "design") cfg.design = val;
        else if (key == "algorithms") cfg.algorithms = detail::split_list(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "max-iters") cfg.max_iters = std::stoi(val);
        else if (key == "output-path") cfg.output_path = val;
        else if (key == "dims") cfg.dims = detail::parse_doubles(val);
        else if (key == "delta-grid") cfg.delta_grid = detail::parse_doubles(val);
        else throw std::invalid_argument("unknown config key: " + key);
    }
    if (cfg.type == "sweep") {
        if (cfg.grid.empty()) throw std::invalid_argument("config needs a non-empty grid");
        if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
        if (cfg.algorithms.empty()) throw std::invalid_argument("algorithms list is empty");
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    ExperimentConfig cfg = parse_experiment_config(f);
    if (cfg.output_path.empty()) cfg.output_path = cfg.name.empty() ? "experiment" : cfg.name;
    return cfg;
}

// ---- experiment runner ----

struct MetricRow {
    std::string algorithm;
    double series_value = 0.0;
    double axis_value = 0.0;
    int trial = 0;
    std::uint64_t seed = 0;
    double corr = 0.0;
    double mse = 0.0;
    int iterations = 0;
    double wall_ms = 0.0;
    double se_corr = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

inline constexpr const char* kSweepCsvSchema = "rigamp-sweep-v1";
inline constexpr const char* kTimingCsvSchema = "rigamp-timing-v1";

namespace detail {

struct ProblemPoint {
    double delta, sigma;
};

inline ProblemPoint resolve_point(const ExperimentConfig& cfg, double series_value,
                                  double axis_value) {
    ProblemPoint p{cfg.delta, cfg.sigma};
    if (cfg.series_axis == "sigma") p.sigma = series_value;
    else if (cfg.series_axis == "delta") p.delta = series_value;
    if (cfg.sweep_axis == "sigma") p.sigma = axis_value;
    else if (cfg.sweep_axis == "delta") p.delta = axis_value;
    return p;
}

inline CumulantSet config_cumulants(const ExperimentConfig& cfg, double delta, int max_iters) {
    int K = 2 * max_iters + 6;  // SE needs orders up to 2(2t+3)
    if (cfg.spectrum == "beta") return beta_reference_cumulants(K, delta);
    if (cfg.spectrum == "gaussian") return gaussian_design_cumulants(K, delta);
    throw std::invalid_argument("unknown spectrum: " + cfg.spectrum);
}

inline DesignSpec config_design(const ExperimentConfig& cfg) {
    DesignSpec spec;
    if (cfg.spectrum == "gaussian" || cfg.design == "gaussian") {
        spec.variant = DesignSpec::Variant::IidGaussian;
        spec.law = DesignSpec::SingularLaw::MarchenkoPasturViaGaussian;
    } else if (cfg.design == "dense") {
        spec.variant = DesignSpec::Variant::ExplicitDense;
    } else {
        spec.variant = DesignSpec::Variant::Structured;
    }
    return spec;
}

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

}  // namespace detail

// Runs one algorithm on one instance; returns (estimate, iterations).
inline std::pair<VectorXd, int> run_algorithm(const std::string& algo, const GLMInstance& inst,
                                              const CumulantSet& cum, int max_iters,
                                              std::uint64_t seed) {
    if (algo == "rigamp") {
        RigampOptions opts;
        opts.t_max = max_iters;
        RigampResult r = rigamp_run(inst, cum, opts);
        if (r.termination.rfind("error:", 0) == 0) throw std::runtime_error(r.termination);
        return {r.xhat, r.iterations};
    }
    if (algo == "gamp") {
        RigampOptions opts;
        opts.t_max = max_iters;
        RigampResult r = gamp_run(inst, cum, opts);
        if (r.termination.rfind("error:", 0) == 0) throw std::runtime_error(r.termination);
        return {r.xhat, r.iterations};
    }
    if (algo == "lmmse") {
        if (inst.channel.variant != ChannelSpec::Variant::Linear)
            throw std::runtime_error("lmmse requires the linear channel");
        return {lmmse_estimate(inst), 1};
    }
    if (algo == "subgradient") {
        if (inst.channel.variant != ChannelSpec::Variant::OneBitSign)
            throw std::runtime_error("subgradient requires the one-bit channel");
        return {subgradient_onebit(inst, seed), 500};
    }
    throw std::runtime_error("unknown algorithm: " + algo);
}

inline std::vector<MetricRow> run_experiment_rows(const ExperimentConfig& cfg) {
    if (cfg.type != "sweep") throw std::invalid_argument("run_experiment needs a sweep config");
    const bool iter_axis = cfg.sweep_axis == "iteration";
    std::vector<double> series = cfg.series.empty() ? std::vector<double>{0.0} : cfg.series;
    const int max_iters =
        iter_axis ? static_cast<int>(*std::max_element(cfg.grid.begin(), cfg.grid.end()))
                  : cfg.max_iters;

    // SE predictions per (series, axis) point for the rigamp rows.
    const bool want_se = std::find(cfg.algorithms.begin(), cfg.algorithms.end(), "rigamp") !=
                         cfg.algorithms.end();
    auto se_curve = [&](double delta, double sigma) -> std::vector<double> {
        CumulantSet cum = detail::config_cumulants(cfg, delta, max_iters);
        PriorSpec prior = prior_from_name(cfg.prior);
        ChannelSpec chan = channel_from_name(cfg.channel, sigma);
        auto states = se_run(prior, chan, cum, delta, max_iters);
        return se_predict_metrics(states.back(), prior).corr_xhat;
    };

    struct Task {
        double series_value;
        double axis_value;  // ignored for iteration axis
        int trial;
        std::uint64_t point_index;
    };
    std::vector<Task> tasks;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const std::size_t axis_count = iter_axis ? 1 : cfg.grid.size();
        for (std::size_t gi = 0; gi < axis_count; ++gi)
            for (int trial = 0; trial < cfg.trials; ++trial)
                tasks.push_back({series[si], iter_axis ? 0.0 : cfg.grid[gi], trial,
                                 static_cast<std::uint64_t>(si * axis_count + gi)});
    }

    // SE curves are computed once per point, up front (they are deterministic).
    std::map<std::uint64_t, std::vector<double>> se_by_point;
    if (want_se) {
        for (const Task& task : tasks) {
            if (se_by_point.count(task.point_index)) continue;
            detail::ProblemPoint p = detail::resolve_point(cfg, task.series_value,
                                                           task.axis_value);
            se_by_point[task.point_index] = se_curve(p.delta, p.sigma);
        }
    }

    std::vector<std::vector<MetricRow>> buffers(tasks.size());
    run_indexed_tasks(static_cast<int>(tasks.size()), [&](int ti) {
        const Task& task = tasks[ti];
        detail::ProblemPoint p = detail::resolve_point(cfg, task.series_value, task.axis_value);
        std::uint64_t seed = hash_combine(hash_combine(cfg.seed, task.point_index),
                                          static_cast<std::uint64_t>(task.trial));
        const std::vector<double>* se =
            want_se && se_by_point.count(task.point_index) ? &se_by_point[task.point_index]
                                                           : nullptr;
        for (const std::string& algo : cfg.algorithms) {
            MetricRow base;
            base.algorithm = algo;
            base.series_value = task.series_value;
            base.trial = task.trial;
            base.seed = seed;
            try {
                CumulantSet cum = detail::config_cumulants(cfg, p.delta, max_iters);
                PriorSpec prior = prior_from_name(cfg.prior);
                ChannelSpec chan = channel_from_name(cfg.channel, p.sigma);
                int n = std::max(1, static_cast<int>(std::lround(p.delta * cfg.d)));
                GLMInstance inst =
                    generate_instance(prior, chan, detail::config_design(cfg), n, cfg.d, seed);
                StopWatch w;
                if (iter_axis && (algo == "rigamp" || algo == "gamp")) {
                    // one solver run yields every per-iteration row
                    RigampOptions opts;
                    opts.t_max = max_iters;
                    opts.tol = 0.0;  // keep iterating so each grid row exists
                    RigampResult r = algo == "rigamp" ? rigamp_run(inst, cum, opts)
                                                      : gamp_run(inst, cum, opts);
                    double wall = w.ms();
                    for (double gv : cfg.grid) {
                        MetricRow row = base;
                        row.axis_value = gv;
                        int t = static_cast<int>(gv);
                        if (t >= 1 && t <= static_cast<int>(r.diag.size())) {
                            row.corr = r.diag[t - 1].corr;
                            row.mse = r.diag[t - 1].mse;
                            row.iterations = t;
                            row.wall_ms = wall;
                            if (algo == "rigamp" && se && t <= static_cast<int>(se->size()))
                                row.se_corr = (*se)[t - 1];
                        } else {
                            row.error = "iteration " + std::to_string(t) + " not reached (" +
                                        r.termination + ")";
                        }
                        buffers[ti].push_back(std::move(row));
                    }
                } else {
                    auto [xhat, iters] = run_algorithm(algo, inst, cum, max_iters, seed);
                    Metrics m = compute_metrics(xhat, inst.x_star);
                    MetricRow row = base;
                    row.axis_value = iter_axis ? 0.0 : task.axis_value;
                    row.corr = m.corr;
                    row.mse = m.mse;
                    row.iterations = iters;
                    row.wall_ms = w.ms();
                    if (algo == "rigamp" && se && !se->empty()) row.se_corr = se->back();
                    buffers[ti].push_back(std::move(row));
                }
            } catch (const std::exception& e) {
                MetricRow row = base;
                row.axis_value = task.axis_value;
                row.error = e.what();
                buffers[ti].push_back(std::move(row));
            }
        }
    });

    std::vector<MetricRow> rows;
    for (auto& b : buffers)
        for (auto& r : b) rows.push_back(std::move(r));
    return rows;
}

inline void write_rows_csv(const std::vector<MetricRow>& rows, const ExperimentConfig& cfg,
                           std::ostream& out) {
    out << "# schema: " << kSweepCsvSchema << "\n";
    out << "algorithm,series_axis,series_value,axis,axis_value,trial,seed,corr,mse,"
           "iterations,wall_ms,se_corr,error\n";
    for (const MetricRow& r : rows) {
        out << r.algorithm << ',' << cfg.series_axis << ',' << detail::fmt_double(r.series_value)
            << ',' << cfg.sweep_axis << ',' << detail::fmt_double(r.axis_value) << ',' << r.trial
            << ',' << r.seed << ',' << (r.error.empty() ? detail::fmt_double(r.corr) : "") << ','
            << (r.error.empty() ? detail::fmt_double(r.mse) : "") << ',' << r.iterations << ','
            << detail::fmt_double(r.wall_ms) << ',' << detail::fmt_double(r.se_corr) << ','
            << r.error << "\n";
    }
}

inline nlohmann::json summarize_rows(const std::vector<MetricRow>& rows) {
    // mean and standard deviation of corr/mse per (algorithm, series, axis) point
    std::map<std::tuple<std::string, double, double>, std::vector<const MetricRow*>> groups;
    for (const MetricRow& r : rows)
        if (r.error.empty())
            groups[{r.algorithm, r.series_value, r.axis_value}].push_back(&r);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, members] : groups) {
        auto mean_std = [&](auto get) {
            double mean = 0.0;
            for (const MetricRow* m : members) mean += get(*m);
            mean /= members.size();
            double var = 0.0;
            for (const MetricRow* m : members) var += std::pow(get(*m) - mean, 2);
            var = members.size() > 1 ? var / (members.size() - 1) : 0.0;
            return std::pair<double, double>(mean, std::sqrt(var));
        };
        auto [cm, cs] = mean_std([](const MetricRow& r) { return r.corr; });
        auto [mm, ms] = mean_std([](const MetricRow& r) { return r.mse; });
        out.push_back({{"algorithm", std::get<0>(key)},
                       {"series_value", std::get<1>(key)},
                       {"axis_value", std::get<2>(key)},
                       {"trials", members.size()},
                       {"corr_mean", cm},
                       {"corr_std", cs},
                       {"mse_mean", mm},
                       {"mse_std", ms}});
    }
    return out;
}

inline void run_experiment(const ExperimentConfig& cfg) {
    std::vector<MetricRow> rows = run_experiment_rows(cfg);
    std::ofstream csv(cfg.output_path + ".csv");
    if (!csv) throw std::runtime_error("cannot write " + cfg.output_path + ".csv");
    write_rows_csv(rows, cfg, csv);
    std::ofstream js(cfg.output_path + ".summary.json");
    js << summarize_rows(rows).dump(2) << "\n";
}

// ---- timing benchmark ----

struct TimingRow {
    int d = 0;
    double delta = 0.0;
    double cumulant_ms = 0.0;
    double svd_ms = 0.0;
    double periter_ms = 0.0;
};

inline std::vector<TimingRow> timing_benchmark(const std::vector<int>& dims,
                                               const std::vector<double>& deltas,
                                               std::uint64_t seed = 1) {
    std::vector<TimingRow> rows;
    for (int d : dims)
        for (double delta : deltas) {
            TimingRow row;
            row.d = d;
            row.delta = delta;
            int n = std::max(1, static_cast<int>(std::lround(delta * d)));
            PriorSpec prior = prior_from_name("rademacher");
            ChannelSpec chan = channel_from_name("linear", 0.1);
            DesignSpec dspec;
            dspec.variant = DesignSpec::Variant::ExplicitDense;
            GLMInstance inst = generate_instance(prior, chan, dspec, n, d, seed);

            Rng rng = make_rng(hash_combine(seed, 0x71E5));
            StopWatch w1;
            CumulantSet est = estimate_cumulants(*inst.design, 10, rng);
            row.cumulant_ms = w1.ms();
            (void)est;

            MatrixXd a = materialize(*inst.design);
            StopWatch w2;
            Eigen::BDCSVD<MatrixXd> svd(a);
            row.svd_ms = w2.ms();
            (void)svd;

            CumulantSet cum = beta_reference_cumulants(2 * 5 + 6, delta);
            RigampOptions opts;
            opts.t_max = 5;
            opts.tol = 0.0;
            StopWatch w3;
            RigampResult r = rigamp_run(inst, cum, opts);
            row.periter_ms = w3.ms() / std::max(1, r.iterations);
            rows.push_back(row);
        }
    return rows;
}

inline void write_timing_csv(const std::vector<TimingRow>& rows, std::ostream& out) {
    out << "# schema: " << kTimingCsvSchema << "\n";
    out << "d,delta,cumulant_ms,svd_ms,periter_ms\n";
    for (const TimingRow& r : rows)
        out << r.d << ',' << detail::fmt_double(r.delta) << ','
            << detail::fmt_double(r.cumulant_ms) << ',' << detail::fmt_double(r.svd_ms) << ','
            << detail::fmt_double(r.periter_ms) << "\n";
}

}  // namespace rigamp
