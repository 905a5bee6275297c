#pragma once

#include <cstdio>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rigamp/cumulants.hpp"
#include "rigamp/denoisers.hpp"
#include "rigamp/se_algebra.hpp"
#include "rigamp/util.hpp"

namespace rigamp {

struct SEOptions {
    int gh_order = 40;  // Gauss-Hermite order for the 1-D / 2-D reductions
    // Restrict every denoiser to its most recent iterate (the separable GAMP
    // form). The covariance bookkeeping then loses the projection nesting and
    // falls back to general bivariate reductions.
    bool last_iterate_only = false;
};

// State-evolution bundle after t steps: mu has length t, omega is the t x t
// covariance of (W_1..W_t), sigma the t x t covariance of (G, R_1..R_{t-1}).
struct SEState {
    int t = 0;
    VectorXd mu;
    MatrixXd omega;
    MatrixXd sigma;
};

namespace detail {

// ---- signal-side expectations ----
//
// Every f_i depends on (x_1..x_i) only through theta_i = w_i^T x with
// w_i = Omega_i^{-1} mu_i, and theta_i = c_i X* + xi_i with
// Var(xi_i) = c_i and Cov(xi_i, xi_j) = c_{min(i,j)} (nested projections).
// This reduces all signal-side expectations to 1-D or 2-D quadrature plus an
// expectation over the prior.
struct SignalLawStats {
    const PriorSpec* prior;
    std::vector<SignalPosteriorContext> ctx;  // ctx[i-1] for f_i
    std::vector<double> c;                    // c[i-1] = mu_i^T Omega_i^{-1} mu_i
    MatrixXd xi_cov;                          // Cov(xi_i, xi_j), 0-based
    const GaussHermite* gh;
    bool last_only;

    SignalLawStats(const PriorSpec& prior_in, const VectorXd& mu, const MatrixXd& omega,
                   const GaussHermite& gh_in, bool last_only_in = false)
        : prior(&prior_in), gh(&gh_in), last_only(last_only_in) {
        const int t = static_cast<int>(mu.size());
        ctx.reserve(t);
        c.reserve(t);
        for (int i = 1; i <= t; ++i) {
            if (last_only)
                ctx.emplace_back(mu.segment(i - 1, 1), omega.block(i - 1, i - 1, 1, 1));
            else
                ctx.emplace_back(mu.head(i), omega.topLeftCorner(i, i));
            c.push_back(ctx.back().c);
        }
        xi_cov = MatrixXd::Zero(t, t);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < t; ++j) {
                if (last_only) {
                    double wi = ctx[i].omega_inv_mu[0], wj = ctx[j].omega_inv_mu[0];
                    xi_cov(i, j) = wi * wj * omega(i, j);
                } else {
                    xi_cov(i, j) = c[std::min(i, j)];
                }
            }
    }

    // E over the prior of fn(x_star).
    double prior_expect(const std::function<double(double)>& fn) const {
        switch (prior->variant) {
            case PriorSpec::Variant::Rademacher:
                return 0.5 * (fn(1.0) + fn(-1.0));
            case PriorSpec::Variant::StandardGaussian:
                return gh->expect(fn);
            case PriorSpec::Variant::BernoulliGaussianNonneg: {
                double s = std::sqrt(prior->sigma2);
                double slab = gh->expect([&](double z) { return fn(std::abs(s * z)); });
                return (1.0 - prior->lambda) * fn(0.0) + prior->lambda * slab;
            }
        }
        return 0.0;
    }

    // E{ fn(X*, theta_i) }, 1-based i.
    double e1(int i, const std::function<double(double, double)>& fn) const {
        double ci = c[i - 1];
        double sd = std::sqrt(std::max(ci, 0.0));
        return prior_expect([&](double x) {
            return gh->expect([&](double z) { return fn(x, ci * x + sd * z); });
        });
    }

    // E{ fn(X*, theta_i, theta_j) }; theta_k = c_k X* + xi_k with the xi
    // covariance from xi_cov (nested in the full mode, general otherwise).
    double e2(int i, int j, const std::function<double(double, double, double)>& fn) const {
        double ci = c[i - 1], cj = c[j - 1];
        double vii = std::max(xi_cov(i - 1, i - 1), 0.0);
        double vjj = std::max(xi_cov(j - 1, j - 1), 0.0);
        double vij = xi_cov(i - 1, j - 1);
        double s1 = std::sqrt(vii);
        double b = s1 > 0.0 ? vij / s1 : 0.0;
        double s2 = std::sqrt(std::max(vjj - b * b, 0.0));
        return prior_expect([&](double x) {
            return gh->expect([&](double z1) {
                return gh->expect([&](double z2) {
                    return fn(x, ci * x + s1 * z1, cj * x + b * z1 + s2 * z2);
                });
            });
        });
    }

    double fvalue(int i, double theta) const { return f_scalar(*prior, ctx[i - 1], theta).value; }

    double e_xstar_f(int i) const {
        return e1(i, [&](double x, double th) { return x * fvalue(i, th); });
    }
    double e_f_sq(int i) const {
        return e1(i, [&](double, double th) { double v = fvalue(i, th); return v * v; });
    }
    double e_ff(int i, int j) const {
        if (i == j) return e_f_sq(i);
        return e2(i, j,
                  [&](double, double ti, double tj) { return fvalue(i, ti) * fvalue(j, tj); });
    }
    // E{ d f_i / d theta }; the gradient expectation row is this times w_i.
    double e_dtheta(int i) const {
        return e1(i, [&](double, double th) { return f_scalar(*prior, ctx[i - 1], th).dtheta; });
    }
    double e_mse(int i) const {
        return e1(i, [&](double x, double th) {
            double v = fvalue(i, th) - x;
            return v * v;
        });
    }

    // Gamma_{t+1} and Psi_{t+1} (both (t+1) x (t+1)).
    MatrixXd gamma_bar() const {
        const int t = static_cast<int>(ctx.size());
        MatrixXd g = MatrixXd::Zero(t + 1, t + 1);
        g(0, 0) = prior->second_moment();
        for (int i = 1; i <= t; ++i) {
            g(0, i) = e_xstar_f(i);
            g(i, 0) = g(0, i);
            for (int j = i; j <= t; ++j) {
                g(i, j) = e_ff(i, j);
                g(j, i) = g(i, j);
            }
        }
        return g;
    }

    MatrixXd psi_bar() const {
        const int t = static_cast<int>(ctx.size());
        MatrixXd p = MatrixXd::Zero(t + 1, t + 1);
        for (int i = 1; i <= t; ++i) {
            double d = e_dtheta(i);
            if (last_only)
                p(i, i) = d * ctx[i - 1].omega_inv_mu[0];
            else
                for (int k = 1; k <= i; ++k) p(i, k) = d * ctx[i - 1].omega_inv_mu[k - 1];
        }
        return p;
    }
};

// ---- channel-side expectations ----
//
// S_i = h_i(R_1..R_{i-1}, Y). The one-bit h_i depends on the R's only through
// rhat_i = E{G | R_1..R_{i-1}} with Var(rhat_i) = rho_i, Cov(G, rhat_i) =
// rho_i and Cov(rhat_i, rhat_j) = rho_{min(i,j)} (projection nesting); the
// linear h_i is a linear functional of (G, R's, eps). Both reduce to <= 2-D
// quadrature or closed-form covariance algebra.
struct ChannelLawStats {
    ChannelSpec channel;
    MatrixXd sigma;                            // t x t covariance of (G, R_1..R_{t-1})
    std::vector<ChannelPosteriorContext> ctx;  // ctx[i-2] for h_i, i = 2..t
    std::vector<double> rho;                   // rho[i-2] = Var(rhat for h_i)
    MatrixXd rhat_cov;                         // Cov(rhat_i, rhat_j), 0-based at i-2
    const GaussHermite* gh;
    bool last_only;
    // linear channel: coefficient of S_i on the basis (G, R_1..R_{t-1}, eps)
    std::vector<VectorXd> lin_coeff;
    MatrixXd basis_cov;

    ChannelLawStats(const ChannelSpec& channel_in, const MatrixXd& sigma_in,
                    const GaussHermite& gh_in, bool last_only_in = false)
        : channel(channel_in), sigma(sigma_in), gh(&gh_in), last_only(last_only_in) {
        const int t = static_cast<int>(sigma.rows());
        for (int i = 2; i <= t; ++i) {
            if (last_only) {
                MatrixXd s2(2, 2);
                s2 << sigma(0, 0), sigma(0, i - 1), sigma(i - 1, 0), sigma(i - 1, i - 1);
                ctx.emplace_back(s2, channel);
            } else {
                ctx.emplace_back(sigma.topLeftCorner(i, i), channel);
            }
            rho.push_back(std::max(sigma(0, 0) - ctx.back().sigma_hat2, 0.0));
        }
        rhat_cov = MatrixXd::Zero(std::max(t - 1, 0), std::max(t - 1, 0));
        for (int i = 2; i <= t; ++i)
            for (int j = 2; j <= t; ++j) {
                if (last_only) {
                    double wi = ctx[i - 2].w_r[0], wj = ctx[j - 2].w_r[0];
                    rhat_cov(i - 2, j - 2) = wi * wj * sigma(i - 1, j - 1);
                } else {
                    rhat_cov(i - 2, j - 2) = rho[std::min(i, j) - 2];
                }
            }
        if (channel.variant == ChannelSpec::Variant::Linear) {
            basis_cov = MatrixXd::Zero(t + 1, t + 1);
            basis_cov.topLeftCorner(t, t) = sigma;
            basis_cov(t, t) = channel.sigma * channel.sigma;
            lin_coeff.resize(t);
            // S_1 = Y = G + eps
            lin_coeff[0] = VectorXd::Zero(t + 1);
            lin_coeff[0][0] = 1.0;
            lin_coeff[0][t] = 1.0;
            for (int i = 2; i <= t; ++i) {
                const auto& cx = ctx[i - 2];
                VectorXd co = VectorXd::Zero(t + 1);
                if (last_only) {
                    co[i - 1] = cx.w_full[0] - cx.w_r[0];
                } else {
                    for (int k = 1; k <= i - 1; ++k) co[k] = cx.w_full[k - 1] - cx.w_r[k - 1];
                }
                double wy = last_only ? cx.w_full[1] : cx.w_full[i - 1];
                co[0] += wy;  // y = G + eps
                co[t] += wy;
                lin_coeff[i - 1] = co;
            }
        }
    }

    int t() const { return static_cast<int>(sigma.rows()); }
    double sigma11() const { return sigma(0, 0); }

    // P(Y = y | rhat_i) for the one-bit channel.
    double onebit_py(int i, double rhat, double y) const {
        double shat = std::sqrt(ctx[i - 2].sigma_hat2);
        double p = normal_cdf(rhat / shat);
        return y > 0 ? p : 1.0 - p;
    }
    double onebit_h(int i, double rhat, double y) const {
        return h_onebit_scalar(rhat, ctx[i - 2].sigma_hat2, y).value;
    }

    double e_ss(int i, int j) const {
        if (i > j) return e_ss(j, i);
        if (channel.variant == ChannelSpec::Variant::Linear)
            return lin_coeff[i - 1].dot(basis_cov * lin_coeff[j - 1]);
        if (i == 1 && j == 1) return 1.0;  // E{Y^2}
        if (i == 1) {
            // E{Y h_j(rhat_j, Y)} with Y resolved through P(y | rhat_j)
            double rj = rho[j - 2];
            double sj = std::sqrt(rj);
            return gh->expect([&](double z) {
                double rh = sj * z;
                return onebit_py(j, rh, 1.0) * onebit_h(j, rh, 1.0) -
                       onebit_py(j, rh, -1.0) * onebit_h(j, rh, -1.0);
            });
        }
        double ri = rho[i - 2], rj = rho[j - 2];
        double s1 = std::sqrt(ri);
        if (i == j)
            return gh->expect([&](double z) {
                double rh = s1 * z;
                return onebit_py(i, rh, 1.0) * std::pow(onebit_h(i, rh, 1.0), 2) +
                       onebit_py(i, rh, -1.0) * std::pow(onebit_h(i, rh, -1.0), 2);
            });
        if (!last_only) {
            // nested projections: G | (rhat_i, rhat_j) ~ N(rhat_j, sigma_hat_j^2)
            double s2 = std::sqrt(std::max(rj - ri, 0.0));
            return gh->expect([&](double z1) {
                return gh->expect([&](double z2) {
                    double rhi = s1 * z1;
                    double rhj = s1 * z1 + s2 * z2;
                    return onebit_py(j, rhj, 1.0) * onebit_h(i, rhi, 1.0) * onebit_h(j, rhj, 1.0) +
                           onebit_py(j, rhj, -1.0) * onebit_h(i, rhi, -1.0) * onebit_h(j, rhj, -1.0);
                });
            });
        }
        // general bivariate reduction: condition sign(G) on both conditional
        // means, whose joint covariance is no longer nested
        double pii = std::max(rhat_cov(i - 2, i - 2), 0.0);
        double pjj = std::max(rhat_cov(j - 2, j - 2), 0.0);
        double pij = rhat_cov(i - 2, j - 2);
        Eigen::Matrix2d p2;
        p2 << pii, pij, pij, pjj;
        Eigen::Vector2d q(ri, rj);
        Eigen::Vector2d w2 = ridge_solve(p2, q);
        double v = std::max(sigma11() - q.dot(w2), 1e-12);
        double sv = std::sqrt(v);
        double a1 = std::sqrt(pii);
        double b1 = a1 > 0.0 ? pij / a1 : 0.0;
        double b2 = std::sqrt(std::max(pjj - b1 * b1, 0.0));
        return gh->expect([&](double z1) {
            return gh->expect([&](double z2) {
                double rhi = a1 * z1;
                double rhj = b1 * z1 + b2 * z2;
                double m = w2[0] * rhi + w2[1] * rhj;
                double p = normal_cdf(m / sv);
                return p * onebit_h(i, rhi, 1.0) * onebit_h(j, rhj, 1.0) +
                       (1.0 - p) * onebit_h(i, rhi, -1.0) * onebit_h(j, rhj, -1.0);
            });
        });
    }

    // E{ d h_i / d rhat }; the row of Phi is this times w_r (one-bit), or the
    // deterministic weights (linear).
    double e_drhat(int i) const {
        double ri = rho[i - 2];
        double s1 = std::sqrt(ri);
        return gh->expect([&](double z) {
            double rh = s1 * z;
            return onebit_py(i, rh, 1.0) * h_onebit_scalar(rh, ctx[i - 2].sigma_hat2, 1.0).drhat +
                   onebit_py(i, rh, -1.0) * h_onebit_scalar(rh, ctx[i - 2].sigma_hat2, -1.0).drhat;
        });
    }

    double e_dg(int i) const {
        if (i == 1) return h1_dg_expectation(channel, sigma11());
        if (channel.variant == ChannelSpec::Variant::Linear) return h_linear_dg(ctx[i - 2]);
        return e_ss(i, i) / ctx[i - 2].sigma_hat2;  // Stein's lemma
    }

    double e_h1_sq() const {
        if (channel.variant == ChannelSpec::Variant::Linear)
            return sigma11() + channel.sigma * channel.sigma;
        return 1.0;
    }

    // Delta_{t+1} and Phi_{t+1} (both (t+1) x (t+1)) built from S_1..S_t.
    MatrixXd delta_bar() const {
        const int tt = t();
        MatrixXd d = MatrixXd::Zero(tt + 1, tt + 1);
        for (int i = 1; i <= tt; ++i)
            for (int j = i; j <= tt; ++j) {
                d(i, j) = e_ss(i, j);
                d(j, i) = d(i, j);
            }
        return d;
    }

    MatrixXd phi_bar() const {
        const int tt = t();
        MatrixXd p = MatrixXd::Zero(tt + 1, tt + 1);
        for (int i = 1; i <= tt; ++i) {
            p(i, 0) = e_dg(i);
            if (i >= 2) {
                const auto& cx = ctx[i - 2];
                if (last_only) {
                    p(i, i - 1) = channel.variant == ChannelSpec::Variant::Linear
                                      ? cx.w_full[0] - cx.w_r[0]
                                      : e_drhat(i) * cx.w_r[0];
                } else if (channel.variant == ChannelSpec::Variant::Linear) {
                    for (int k = 1; k <= i - 1; ++k) p(i, k) = cx.w_full[k - 1] - cx.w_r[k - 1];
                } else {
                    double d = e_drhat(i);
                    for (int k = 1; k <= i - 1; ++k) p(i, k) = d * cx.w_r[k - 1];
                }
            }
        }
        return p;
    }
};

}  // namespace detail

inline SEState se_init(const PriorSpec& prior, const ChannelSpec& channel, const CumulantSet& cum,
                       double delta) {
    double ex2 = prior.second_moment();
    if (ex2 <= 0.0) throw std::invalid_argument("prior has zero second moment");
    double k2 = cum.kappa(1), k4 = cum.kappa(2);
    double sigma1 = k2 * ex2;
    double dg = h1_dg_expectation(channel, sigma1);
    double eh2 = channel.variant == ChannelSpec::Variant::Linear
                     ? sigma1 + channel.sigma * channel.sigma
                     : 1.0;
    SEState st;
    st.t = 1;
    st.mu = VectorXd::Constant(1, delta * k2 * dg);
    st.omega = MatrixXd::Constant(1, 1, delta * k2 * eh2 + delta * k4 * ex2 * dg * dg);
    st.sigma = MatrixXd::Constant(1, 1, sigma1);
    return st;
}

inline SEState se_step(const SEState& state, const PriorSpec& prior, const ChannelSpec& channel,
                       const CumulantSet& cum, double delta, const SEOptions& opts = {}) {
    const int t = state.t;
    GaussHermite gh(opts.gh_order);
    detail::SignalLawStats sig(prior, state.mu, state.omega, gh, opts.last_iterate_only);
    detail::ChannelLawStats chan(channel, state.sigma, gh, opts.last_iterate_only);

    MatrixXd gamma = sig.gamma_bar();  // (t+1) x (t+1)
    MatrixXd psi = sig.psi_bar();
    MatrixXd delta_m = chan.delta_bar();
    MatrixXd phi = chan.phi_bar();

    MatrixXd sigma_next = se_sigma_update(gamma, delta_m, psi, phi, cum, 2 * t + 1);
    // enforce exact nesting: only the new row/column is taken from the update
    sigma_next = 0.5 * (sigma_next + sigma_next.transpose());
    sigma_next.topLeftCorner(t, t) = state.sigma;

    detail::ChannelLawStats chan2(channel, sigma_next, gh, opts.last_iterate_only);
    MatrixXd delta2 = chan2.delta_bar();  // (t+2) x (t+2)
    MatrixXd phi2 = chan2.phi_bar();
    MatrixXd gamma_e = embed_top_left(gamma, t + 2);
    MatrixXd psi_e = embed_top_left(psi, t + 2);

    MatrixXd omega_prime = se_omega_prime(gamma_e, delta2, psi_e, phi2, cum, delta, 2 * (t + 1));
    MatrixXd omega_next = omega_prime.bottomRightCorner(t + 1, t + 1);
    omega_next = 0.5 * (omega_next + omega_next.transpose());
    omega_next.topLeftCorner(t, t) = state.omega;

    // PSD sanity: a violation beyond tolerance is repaired by eigenvalue
    // clipping (logged), then exact nesting is re-imposed.
    auto psd_guard = [&](MatrixXd& m, const MatrixXd& nested, const char* name) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
        double floor = -1e-10 * std::max(m.trace(), 1e-300);
        if (es.eigenvalues().minCoeff() < floor) {
            std::fprintf(stderr, "state evolution: PSD repair of %s at t=%d (min eig %.3e)\n",
                         name, t + 1, es.eigenvalues().minCoeff());
            m = psd_clip(m);
            m.topLeftCorner(nested.rows(), nested.cols()) = nested;
        }
    };
    psd_guard(sigma_next, state.sigma, "Sigma");
    psd_guard(omega_next, state.omega, "Omega");

    double mu_next = se_mu_next(psi_e, phi2, cum, delta, t + 1);

    SEState next;
    next.t = t + 1;
    next.mu = VectorXd(t + 1);
    next.mu.head(t) = state.mu;
    next.mu[t] = mu_next;
    next.omega = omega_next;
    next.sigma = sigma_next;
    return next;
}

inline std::vector<SEState> se_run(const PriorSpec& prior, const ChannelSpec& channel,
                                   const CumulantSet& cum, double delta, int T,
                                   const SEOptions& opts = {}) {
    std::vector<SEState> states;
    states.push_back(se_init(prior, channel, cum, delta));
    for (int t = 1; t < T; ++t)
        states.push_back(se_step(states.back(), prior, channel, cum, delta, opts));
    return states;
}

struct SEPrediction {
    std::vector<double> corr_xhat;  // (E{Xhat_t X*})^2 / (E{Xhat_t^2} E{X*^2})
    std::vector<double> corr_x;     // mu_t^2 E{X*^2} / (mu_t^2 E{X*^2} + Omega_tt) squared corr of x^t
    std::vector<double> mse;        // E{(Xhat_t - X*)^2}
};

inline SEPrediction se_predict_metrics(const SEState& state, const PriorSpec& prior,
                                       const SEOptions& opts = {}) {
    GaussHermite gh(opts.gh_order);
    detail::SignalLawStats sig(prior, state.mu, state.omega, gh, opts.last_iterate_only);
    double ex2 = prior.second_moment();
    SEPrediction pred;
    for (int i = 1; i <= state.t; ++i) {
        double exf = sig.e_xstar_f(i);
        double ef2 = sig.e_f_sq(i);
        double corr = ef2 > 0.0 ? exf * exf / (ef2 * ex2) : 0.0;
        pred.corr_xhat.push_back(corr);
        double mu = state.mu[i - 1], om = state.omega(i - 1, i - 1);
        double num = mu * mu * ex2;
        pred.corr_x.push_back(num + om > 0.0 ? num / (num + om) : 0.0);
        pred.mse.push_back(sig.e_mse(i));
    }
    return pred;
}

}  // namespace rigamp
