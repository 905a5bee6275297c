#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rigamp/cumulants.hpp"
#include "rigamp/denoisers.hpp"
#include "rigamp/ensembles.hpp"
#include "rigamp/se_algebra.hpp"
#include "rigamp/state_evolution.hpp"
#include "rigamp/util.hpp"

namespace rigamp {

struct RigampOptions {
    int t_max = 50;
    double tol = 1e-6;            // stop when ||xhat^t - xhat^{t-1}|| / ||xhat^{t-1}|| < tol
    double cond_cap = 1e10;       // cap on cond(Omega_t) before graceful termination
    bool last_iterate_only = false;  // GAMP-style single-memory denoisers
    bool deterministic_se = false;   // take denoiser parameters from the SE module
    const std::vector<SEState>* se_states = nullptr;  // required if deterministic_se
    VectorXd x1_injection;        // test mode: informative initialization for x^1
};

struct IterationDiagnostics {
    int t = 0;
    double corr = 0.0;
    double mse = 0.0;
    double cond_omega = 0.0;
    double cond_sigma = 0.0;
    double wall_ms = 0.0;
};

// Full iterate record plus the running empirical state-evolution quantities.
struct IterateHistory {
    std::vector<VectorXd> x, xhat;  // length-d iterates
    std::vector<VectorXd> r, s;     // length-n iterates
    std::vector<std::vector<double>> fx_rows;  // <d_k xhat^i> rows
    std::vector<std::vector<double>> sr_rows;  // <d_k s^i> rows
    std::vector<double> sg;                    // <d_g s^i>
    VectorXd mu;       // empirical mu_1..mu_t
    MatrixXd omega;    // empirical Omega_t
    MatrixXd sigma;    // empirical Sigma_{t+1}
    std::vector<VectorXd> alpha, beta;  // Onsager coefficient records
};

struct RigampResult {
    VectorXd xhat;
    int iterations = 0;
    std::string termination;  // converged | max-iters | condition-cap | error:<what>
    std::vector<IterationDiagnostics> diag;
    IterateHistory history;
};

namespace detail {

inline void check_finite(const VectorXd& v, const char* name, int t) {
    if (!v.allFinite())
        throw std::runtime_error(std::string("non-finite values in ") + name +
                                 " at iteration " + std::to_string(t));
}

// Evaluate f_t over all d rows. The inputs enter only through
// theta = sum_k w_k x^k, so the evaluation is a vector combination followed
// by a scalar map; also returns the row-averaged gradient components.
struct FApplyResult {
    VectorXd value;
    std::vector<double> grad_row;  // <d_k xhat^t> for k = 1..t
};

inline FApplyResult apply_f(const PriorSpec& prior, const SignalPosteriorContext& ctx,
                            const std::vector<VectorXd>& x_hist, int first, int t) {
    const int d = static_cast<int>(x_hist[0].size());
    const int m = ctx.t();  // number of inputs the context consumes
    VectorXd theta = VectorXd::Zero(d);
    for (int k = 0; k < m; ++k) theta += ctx.omega_inv_mu[k] * x_hist[first + k];
    FApplyResult out;
    out.value.resize(d);
    double mean_dtheta = 0.0;
    for (int i = 0; i < d; ++i) {
        SignalDenoiserScalar s = f_scalar(prior, ctx, theta[i]);
        out.value[i] = s.value;
        mean_dtheta += s.dtheta;
    }
    mean_dtheta /= d;
    out.grad_row.assign(t, 0.0);
    for (int k = 0; k < m; ++k) out.grad_row[first + k] = mean_dtheta * ctx.omega_inv_mu[k];
    return out;
}

// Evaluate h_{t+1} over all n rows; returns the value vector, the
// row-averaged d/dr_k components, and <d_g s^{t+1}>.
struct HApplyResult {
    VectorXd value;
    std::vector<double> grad_row;  // <d_k s^{t+1}> for k = 1..t
    double dg = 0.0;
};

inline HApplyResult apply_h(const ChannelPosteriorContext& ctx,
                            const std::vector<VectorXd>& r_hist, int first, int t,
                            const VectorXd& y) {
    const int n = static_cast<int>(y.size());
    const int m = ctx.t();
    HApplyResult out;
    out.grad_row.assign(t, 0.0);
    if (ctx.channel.variant == ChannelSpec::Variant::Linear) {
        VectorXd v = ctx.w_full[m] * y;
        for (int k = 0; k < m; ++k) v += (ctx.w_full[k] - ctx.w_r[k]) * r_hist[first + k];
        out.value = std::move(v);
        for (int k = 0; k < m; ++k) out.grad_row[first + k] = ctx.w_full[k] - ctx.w_r[k];
        out.dg = ctx.w_full[m];
        return out;
    }
    VectorXd rhat = VectorXd::Zero(n);
    for (int k = 0; k < m; ++k) rhat += ctx.w_r[k] * r_hist[first + k];
    out.value.resize(n);
    double mean_drhat = 0.0, mean_h2 = 0.0;
    for (int i = 0; i < n; ++i) {
        ChannelDenoiserScalar s = h_onebit_scalar(rhat[i], ctx.sigma_hat2, y[i]);
        out.value[i] = s.value;
        mean_drhat += s.drhat;
        mean_h2 += s.value * s.value;
    }
    mean_drhat /= n;
    mean_h2 /= n;
    for (int k = 0; k < m; ++k) out.grad_row[first + k] = mean_drhat * ctx.w_r[k];
    out.dg = mean_h2 / ctx.sigma_hat2;  // Stein's lemma
    return out;
}

}  // namespace detail

inline double normalized_sq_correlation(const VectorXd& a, const VectorXd& b) {
    double na = a.squaredNorm(), nb = b.squaredNorm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    double ip = a.dot(b);
    return ip * ip / (na * nb);
}

inline RigampResult rigamp_run(const GLMInstance& inst, const CumulantSet& cum,
                               const RigampOptions& opts = {}) {
    const int n = inst.n(), d = inst.d();
    const double delta = inst.delta();
    const double ex2 = inst.prior.second_moment();
    if (opts.deterministic_se &&
        (!opts.se_states || static_cast<int>(opts.se_states->size()) < opts.t_max))
        throw std::invalid_argument("deterministic-SE mode needs se_states covering t_max");

    RigampResult res;
    IterateHistory& H = res.history;
    StopWatch total;

    try {
        // ---- t = 1 initialization: s^1 = h_1(y) = y, x^1 = A^T s^1 ----
        H.s.push_back(inst.y);
        H.sr_rows.push_back({});
        // <d_g s^1> is set to the deterministic limit E{d_g h_1}
        double sigma11 = opts.deterministic_se ? (*opts.se_states)[0].sigma(0, 0)
                                               : cum.kappa(1) * ex2;
        H.sg.push_back(h1_dg_expectation(inst.channel, sigma11));

        for (int t = 1; t <= opts.t_max; ++t) {
            StopWatch iter_watch;
            IterationDiagnostics dg;
            dg.t = t;

            // ---- x^t = A^T s^t - sum beta_{ti} xhat^i ----
            VectorXd xt = (t == 1 && opts.x1_injection.size() == d)
                              ? opts.x1_injection
                              : inst.design->apply_transpose(H.s[t - 1]);
            MatrixXd psi_part = build_psi(H.fx_rows, t + 1);  // last row still zero
            MatrixXd phi_full = build_phi(H.sg, H.sr_rows, t + 1);
            if (t >= 2) {
                MatrixXd m_beta = onsager_m_beta(psi_part, phi_full, cum, delta, t + 1);
                VectorXd beta = beta_from_m(m_beta);
                H.beta.push_back(beta);
                for (int i = 0; i < t - 1; ++i) xt -= beta[i] * H.xhat[i];
            } else {
                H.beta.push_back(VectorXd());
            }
            detail::check_finite(xt, "x", t);
            H.x.push_back(std::move(xt));

            // ---- empirical (or deterministic) SE parameters mu_t, Omega_t ----
            VectorXd mu_t;
            MatrixXd omega_t;
            if (opts.deterministic_se) {
                const SEState& se = opts.se_states->back();
                mu_t = se.mu.head(t);
                omega_t = se.omega.topLeftCorner(t, t);
            } else {
                MatrixXd delta_m = MatrixXd::Zero(t + 1, t + 1);
                for (int i = 1; i <= t; ++i)
                    for (int j = i; j <= t; ++j) {
                        delta_m(i, j) = H.s[i - 1].dot(H.s[j - 1]) / n;
                        delta_m(j, i) = delta_m(i, j);
                    }
                MatrixXd gamma = MatrixXd::Zero(t + 1, t + 1);
                gamma(0, 0) = ex2;
                for (int i = 1; i <= t - 1; ++i) {
                    gamma(0, i) = H.xhat[i - 1].squaredNorm() / d;  // E{X* Xhat_i} = E{Xhat_i^2}
                    gamma(i, 0) = gamma(0, i);
                    for (int j = i; j <= t - 1; ++j) {
                        gamma(i, j) = H.xhat[i - 1].dot(H.xhat[j - 1]) / d;
                        gamma(j, i) = gamma(i, j);
                    }
                }
                MatrixXd omega_prime =
                    se_omega_prime(gamma, delta_m, psi_part, phi_full, cum, delta, 2 * t);
                omega_t = omega_prime.bottomRightCorner(t, t);
                omega_t = 0.5 * (omega_t + omega_t.transpose());
                mu_t = VectorXd(t);
                if (t >= 2) mu_t.head(t - 1) = H.mu;
                mu_t[t - 1] = se_mu_next(psi_part, phi_full, cum, delta, t);
            }
            H.mu = mu_t;
            H.omega = omega_t;
            dg.cond_omega = condition_number(omega_t);
            if (dg.cond_omega > opts.cond_cap) {
                res.termination = "condition-cap";
                H.x.pop_back();
                H.beta.pop_back();
                break;
            }

            // ---- xhat^t = f_t(x^1..x^t) ----
            SignalPosteriorContext fctx;
            int f_first = 0;
            if (opts.last_iterate_only) {
                fctx = SignalPosteriorContext(mu_t.tail(1), omega_t.bottomRightCorner(1, 1));
                f_first = t - 1;
            } else {
                fctx = SignalPosteriorContext(mu_t, omega_t);
            }
            detail::FApplyResult fr = detail::apply_f(inst.prior, fctx, H.x, f_first, t);
            detail::check_finite(fr.value, "xhat", t);
            H.xhat.push_back(std::move(fr.value));
            H.fx_rows.push_back(std::move(fr.grad_row));

            // ---- stop rule (checked before the channel half-step) ----
            dg.corr = normalized_sq_correlation(H.xhat[t - 1], inst.x_star);
            dg.mse = (H.xhat[t - 1] - inst.x_star).squaredNorm() / d;
            bool stop = (t == opts.t_max);
            if (!stop && t >= 2) {
                double prev = H.xhat[t - 2].norm();
                double change = (H.xhat[t - 1] - H.xhat[t - 2]).norm();
                if (prev > 0.0 && change / prev < opts.tol) {
                    stop = true;
                    res.termination = "converged";
                }
            }
            if (stop) {
                if (res.termination.empty()) res.termination = "max-iters";
                dg.wall_ms = iter_watch.ms();
                res.diag.push_back(dg);
                break;
            }

            // ---- r^t = A xhat^t - sum alpha_{ti} s^i ----
            MatrixXd psi_full = build_psi(H.fx_rows, t + 1);
            MatrixXd m_alpha = onsager_m_alpha(psi_full, phi_full, cum, t + 1);
            VectorXd alpha = alpha_from_m(m_alpha);
            H.alpha.push_back(alpha);
            VectorXd rt = inst.design->apply(H.xhat[t - 1]);
            for (int i = 0; i < t; ++i) rt -= alpha[i] * H.s[i];
            detail::check_finite(rt, "r", t);
            H.r.push_back(std::move(rt));

            // ---- Sigma_{t+1} and s^{t+1} = h_{t+1}(r^1..r^t, y) ----
            MatrixXd sigma_t1;
            if (opts.deterministic_se) {
                sigma_t1 = (*opts.se_states)[t].sigma;  // cov of (G, R_1..R_t)
            } else {
                MatrixXd delta_m = MatrixXd::Zero(t + 1, t + 1);
                for (int i = 1; i <= t; ++i)
                    for (int j = i; j <= t; ++j) {
                        delta_m(i, j) = H.s[i - 1].dot(H.s[j - 1]) / n;
                        delta_m(j, i) = delta_m(i, j);
                    }
                MatrixXd gamma = MatrixXd::Zero(t + 1, t + 1);
                gamma(0, 0) = ex2;
                for (int i = 1; i <= t; ++i) {
                    gamma(0, i) = H.xhat[i - 1].squaredNorm() / d;
                    gamma(i, 0) = gamma(0, i);
                    for (int j = i; j <= t; ++j) {
                        gamma(i, j) = H.xhat[i - 1].dot(H.xhat[j - 1]) / d;
                        gamma(j, i) = gamma(i, j);
                    }
                }
                sigma_t1 = se_sigma_update(gamma, delta_m, psi_full, phi_full, cum, 2 * t + 1);
                sigma_t1 = 0.5 * (sigma_t1 + sigma_t1.transpose());
            }
            H.sigma = sigma_t1;
            dg.cond_sigma = condition_number(sigma_t1);

            ChannelPosteriorContext hctx;
            int h_first = 0;
            if (opts.last_iterate_only) {
                MatrixXd sub(2, 2);
                sub(0, 0) = sigma_t1(0, 0);
                sub(0, 1) = sigma_t1(0, t);
                sub(1, 0) = sigma_t1(t, 0);
                sub(1, 1) = sigma_t1(t, t);
                hctx = ChannelPosteriorContext(sub, inst.channel);
                h_first = t - 1;
            } else {
                hctx = ChannelPosteriorContext(sigma_t1, inst.channel);
            }
            detail::HApplyResult hr = detail::apply_h(hctx, H.r, h_first, t, inst.y);
            detail::check_finite(hr.value, "s", t + 1);
            H.s.push_back(std::move(hr.value));
            H.sr_rows.push_back(std::move(hr.grad_row));
            H.sg.push_back(hr.dg);

            dg.wall_ms = iter_watch.ms();
            res.diag.push_back(dg);
        }
        if (res.termination.empty()) res.termination = "max-iters";
    } catch (const std::exception& e) {
        res.termination = std::string("error:") + e.what();
    }

    res.iterations = static_cast<int>(H.xhat.size());
    if (!H.xhat.empty()) res.xhat = H.xhat.back();
    (void)total;
    return res;
}

}  // namespace rigamp
