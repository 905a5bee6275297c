#pragma once

#include <stdexcept>

#include "rigamp/ensembles.hpp"
#include "rigamp/util.hpp"

namespace rigamp {

// ---- signal side ----

// Gaussian-law context for the signal denoisers f_t: the iterates behave as
// mu * X_star + W with W ~ N(0, Omega). Every implemented f_t depends on the
// inputs only through the ridge direction w = Omega^{-1} mu.
struct SignalPosteriorContext {
    VectorXd mu;            // length t
    MatrixXd omega;         // t x t
    VectorXd omega_inv_mu;  // w = Omega^{-1} mu (ridge-regularized solve)
    double c = 0.0;         // mu^T Omega^{-1} mu

    SignalPosteriorContext() = default;
    SignalPosteriorContext(VectorXd mu_in, MatrixXd omega_in)
        : mu(std::move(mu_in)), omega(std::move(omega_in)) {
        if (omega.rows() != mu.size() || omega.cols() != mu.size())
            throw std::invalid_argument("signal context dimension mismatch");
        omega_inv_mu = ridge_solve(omega, mu);
        c = mu.dot(omega_inv_mu);
    }

    int t() const { return static_cast<int>(mu.size()); }
};

// Scalar core of each f_t as a function of theta = w^T x. Returns the value
// and d(value)/d(theta); the full gradient is the scalar derivative times w.
struct SignalDenoiserScalar {
    double value = 0.0;
    double dtheta = 0.0;
};

inline SignalDenoiserScalar f_rademacher_scalar(double theta) {
    double v = std::tanh(theta);
    return {v, 1.0 - v * v};
}

inline SignalDenoiserScalar f_gaussian_scalar(double theta, double c) {
    double s = 1.0 / (1.0 + c);
    return {theta * s, s};
}

// Posterior mean of X* ~ (1-lambda) delta_0 + lambda N_+(0, sigma2) given the
// Gaussian observations; evaluated through the truncated-Gaussian posterior of
// the slab with the exp(b^2/8a)(1+Erf(..)) factor kept in log domain.
// Also reports the posterior second moment, whose gap to value^2 is the
// posterior variance = d(value)/d(theta) (exponential-family identity).
inline SignalDenoiserScalar f_bernoulli_gaussian_scalar(double theta, double c, double lambda,
                                                        double sigma2) {
    double a = 1.0 / sigma2 + c;
    double b = 2.0 * theta;
    double sa = std::sqrt(a);
    double m0 = b / (2.0 * a);     // slab posterior mean before truncation
    double z = m0 * sa;            // standardized truncation point
    double log_e = log_erf_term(b / std::sqrt(8.0 * a));
    // slab weight: 1 / (1 + (1-lambda) * sigma * sqrt(a) * exp(-logE) / lambda)
    double log_odds = std::log1p(-lambda) - std::log(lambda) +
                      0.5 * std::log(sigma2 * a) - log_e;
    double w_slab = 1.0 / (1.0 + std::exp(log_odds));
    double mills = inverse_mills(z);  // phi(z)/Phi(z)
    double mean_slab = m0 + mills / sa;
    double m2_slab = m0 * m0 + 1.0 / a + m0 * mills / sa;
    double value = w_slab * mean_slab;
    double second = w_slab * m2_slab;
    return {value, second - value * value};
}

struct DenoiserEval {
    double value = 0.0;
    VectorXd gradient;
};

inline DenoiserEval f_eval(const PriorSpec& prior, const SignalPosteriorContext& ctx,
                           const VectorXd& x) {
    if (x.size() != ctx.mu.size()) throw std::invalid_argument("f_eval dimension mismatch");
    double theta = ctx.omega_inv_mu.dot(x);
    SignalDenoiserScalar s;
    switch (prior.variant) {
        case PriorSpec::Variant::Rademacher:
            s = f_rademacher_scalar(theta);
            break;
        case PriorSpec::Variant::StandardGaussian:
            s = f_gaussian_scalar(theta, ctx.c);
            break;
        case PriorSpec::Variant::BernoulliGaussianNonneg:
            s = f_bernoulli_gaussian_scalar(theta, ctx.c, prior.lambda, prior.sigma2);
            break;
    }
    return {s.value, s.dtheta * ctx.omega_inv_mu};
}

inline SignalDenoiserScalar f_scalar(const PriorSpec& prior, const SignalPosteriorContext& ctx,
                                     double theta) {
    switch (prior.variant) {
        case PriorSpec::Variant::Rademacher:
            return f_rademacher_scalar(theta);
        case PriorSpec::Variant::StandardGaussian:
            return f_gaussian_scalar(theta, ctx.c);
        case PriorSpec::Variant::BernoulliGaussianNonneg:
            return f_bernoulli_gaussian_scalar(theta, ctx.c, prior.lambda, prior.sigma2);
    }
    return {};
}

// ---- channel side ----

// Gaussian-law context for h_{t+1}: sigma_mat is the covariance of
// (G, R_1..R_t). Derived quantities: w_r with rhat = w_r^T r (the conditional
// mean of G given the R's), the conditional variance sigma_hat2, and for the
// linear channel the extended conditioning weights w_full over (r, y).
struct ChannelPosteriorContext {
    MatrixXd sigma_mat;  // (t+1) x (t+1)
    ChannelSpec channel;
    VectorXd w_r;         // length t
    double sigma_hat2 = 0.0;
    VectorXd w_full;      // length t+1 (linear channel only)
    double ey2 = 0.0;     // E{Y^2} (linear channel only)

    ChannelPosteriorContext() = default;
    ChannelPosteriorContext(MatrixXd sigma_in, ChannelSpec channel_in)
        : sigma_mat(std::move(sigma_in)), channel(channel_in) {
        const int t = static_cast<int>(sigma_mat.rows()) - 1;
        if (t < 1) throw std::invalid_argument("channel context needs at least (G, R_1)");
        MatrixXd srr = sigma_mat.bottomRightCorner(t, t);
        VectorXd srg = sigma_mat.col(0).tail(t);
        w_r = ridge_solve(srr, srg);
        sigma_hat2 = std::max(sigma_mat(0, 0) - srg.dot(w_r), 1e-12);
        if (channel.variant == ChannelSpec::Variant::Linear) {
            ey2 = sigma_mat(0, 0) + channel.sigma * channel.sigma;
            // S = [[Sigma, Sigma[:,0]], [Sigma[0,:], E{Y^2}]]; condition G on (r, y)
            MatrixXd s22(t + 1, t + 1);
            s22.topLeftCorner(t, t) = srr;
            s22.col(t).head(t) = srg;
            s22.row(t).head(t) = srg.transpose();
            s22(t, t) = ey2;
            VectorXd s21(t + 1);
            s21.head(t) = srg;
            s21[t] = sigma_mat(0, 0);
            w_full = ridge_solve(s22, s21);
        }
    }

    int t() const { return static_cast<int>(sigma_mat.rows()) - 1; }
    double rhat(const VectorXd& r) const { return w_r.dot(r); }
};

// h and d(h)/d(rhat) for the one-bit channel as a function of rhat alone:
// h = y * sigma_hat * phi(z)/Phi(z) at z = y*rhat/sigma_hat (the Mills-ratio
// form of the paper's expression, stable for large |z| via erfcx).
struct ChannelDenoiserScalar {
    double value = 0.0;
    double drhat = 0.0;
};

inline ChannelDenoiserScalar h_onebit_scalar(double rhat, double sigma_hat2, double y) {
    double shat = std::sqrt(sigma_hat2);
    double z = rhat / shat;
    double mills = inverse_mills(y * z);
    double value = y * shat * mills;
    double drhat = -mills * (y * z + mills);
    return {value, drhat};
}

inline DenoiserEval h_eval(const ChannelPosteriorContext& ctx, const VectorXd& r, double y) {
    const int t = ctx.t();
    if (r.size() != t) throw std::invalid_argument("h_eval dimension mismatch");
    if (ctx.channel.variant == ChannelSpec::Variant::Linear) {
        VectorXd ry(t + 1);
        ry.head(t) = r;
        ry[t] = y;
        double value = ctx.w_full.dot(ry) - ctx.w_r.dot(r);
        return {value, ctx.w_full.head(t) - ctx.w_r};
    }
    double rhat = ctx.rhat(r);
    ChannelDenoiserScalar s = h_onebit_scalar(rhat, ctx.sigma_hat2, y);
    return {s.value, s.drhat * ctx.w_r};
}

// Partial derivative of h w.r.t. g. For the linear channel this is the
// (deterministic) weight on the y coordinate. For one-bit it is an
// expectation via Stein's lemma, E{h^2}/sigma_hat2, evaluated by the caller
// from either quadrature or the sample mean of h^2; this helper covers the
// deterministic linear case and the t = 0 closed forms.
inline double h_linear_dg(const ChannelPosteriorContext& ctx) {
    return ctx.w_full[ctx.t()];
}

// E{dg h_1} at initialization: linear channel h_1(y) = y.
inline double h1_dg_expectation(const ChannelSpec& channel, double sigma11) {
    if (channel.variant == ChannelSpec::Variant::Linear) return 1.0;
    return std::sqrt(2.0 / (M_PI * std::max(sigma11, 1e-300)));
}

}  // namespace rigamp
