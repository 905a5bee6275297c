#pragma once

#include <stdexcept>
#include <vector>

#include "rigamp/rigamp.hpp"
#include "rigamp/state_evolution.hpp"

namespace rigamp {

// Auxiliary AMP recursion (test-only oracle). It rewrites the main recursion
// in terms of iterates that are asymptotically equal to shifted versions of
// the RI-GAMP iterates:
//   x^t  ~ z^{t+1} + mu_t x*        xhat^t ~ v^{t+1}
//   r^t  ~ m^{t+1}                  s^t    ~ u^{t+1}
// with u^1 = 0, z^1 = 0, v^1 = x*, m^1 = A x* and
//   z^t = A^T u^t - sum_{i<t} b_{ti} v^i
//   v^t = f_{t-1}(z^2 + mu_1 x*, .., z^t + mu_{t-1} x*)
//   m^t = A v^t - sum_{i<=t} a_{ti} u^i
//   u^{t+1} = h_t(m^2, .., m^t, y)
// where the denoiser parameters (mu, Omega, Sigma) are injected from the
// deterministic state evolution.
struct AuxHistory {
    std::vector<VectorXd> z, v;  // length d
    std::vector<VectorXd> m, u;  // length n
};

inline AuxHistory aux_amp_run(const GLMInstance& inst, const CumulantSet& cum,
                              const std::vector<SEState>& se_states, int T) {
    const int n = inst.n(), d = inst.d();
    const double delta = inst.delta();
    const VectorXd& mu = se_states.back().mu;
    const MatrixXd& omega = se_states.back().omega;
    if (static_cast<int>(mu.size()) < T - 1)
        throw std::invalid_argument("aux AMP needs SE states up to T-1");

    AuxHistory H;
    H.u.push_back(VectorXd::Zero(n));
    H.z.push_back(VectorXd::Zero(d));
    H.v.push_back(inst.x_star);
    H.m.push_back(inst.design->apply(inst.x_star));

    // Derivative-average rows for the aux matrices Psi-hat / Phi-hat (t x t at
    // step t): row i of Psi-hat is (0, <d_2 v^i>, .., <d_i v^i>), row i of
    // Phi-hat is (<d_1 u^i>, .., <d_{i-1} u^i>, 0, ..). Rows for v^1 = x* and
    // u^1 = 0 are zero.
    std::vector<std::vector<double>> v_rows{{}};   // v_rows[i-1]: d/dz_k for k=2..i
    std::vector<std::vector<double>> u_rows{{}};   // u_rows[i-1]: d/dm_k for k=1..i-1

    // u^2 = h_1(q(m^1, eps)) = y exactly; <d_1 u^2> is the deterministic
    // limit E{d_g h_1}.
    H.u.push_back(inst.y);
    u_rows.push_back({h1_dg_expectation(inst.channel, se_states[0].sigma(0, 0))});
    auto build_hat = [](const std::vector<std::vector<double>>& rows, int dim, int col0) {
        MatrixXd m = MatrixXd::Zero(dim, dim);
        for (std::size_t i = 0; i < rows.size() && static_cast<int>(i) < dim; ++i)
            for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, col0 + k) = rows[i][k];
        return m;
    };

    for (int t = 2; t <= T; ++t) {
        // ---- b_{t,1..t-1} from M^b_t = delta * sum kappa Phi-hat (Psi-hat Phi-hat)^j;
        // the last row never touches the (still missing) last row of Psi-hat.
        MatrixXd psi_hat = build_hat(v_rows, t, 1);
        MatrixXd phi_hat = build_hat(u_rows, t, 0);
        MatrixXd m_b = onsager_m_beta(psi_hat, phi_hat, cum, delta, t);
        VectorXd zt = inst.design->apply_transpose(H.u[t - 1]);
        for (int i = 1; i <= t - 1; ++i) zt -= m_b(t - 1, i - 1) * H.v[i - 1];
        H.z.push_back(std::move(zt));

        // ---- v^t = f_{t-1} applied to x_k = z^{k+1} + mu_k x*, k = 1..t-1 ----
        const int tf = t - 1;
        SignalPosteriorContext fctx(mu.head(tf), omega.topLeftCorner(tf, tf));
        VectorXd theta = VectorXd::Zero(d);
        for (int k = 1; k <= tf; ++k)
            theta += fctx.omega_inv_mu[k - 1] * (H.z[k] + mu[k - 1] * inst.x_star);
        VectorXd vt(d);
        double mean_dtheta = 0.0;
        for (int i = 0; i < d; ++i) {
            SignalDenoiserScalar s = f_scalar(inst.prior, fctx, theta[i]);
            vt[i] = s.value;
            mean_dtheta += s.dtheta;
        }
        mean_dtheta /= d;
        H.v.push_back(std::move(vt));
        std::vector<double> vrow(tf);
        for (int k = 0; k < tf; ++k) vrow[k] = mean_dtheta * fctx.omega_inv_mu[k];
        v_rows.push_back(std::move(vrow));

        // ---- a_{t,1..t} from M^a_t = sum kappa Psi-hat (Phi-hat Psi-hat)^j ----
        psi_hat = build_hat(v_rows, t, 1);
        MatrixXd m_a = onsager_m_alpha(psi_hat, phi_hat, cum, t);
        VectorXd mt = inst.design->apply(H.v[t - 1]);
        for (int i = 1; i <= t; ++i) mt -= m_a(t - 1, i - 1) * H.u[i - 1];
        H.m.push_back(std::move(mt));

        // ---- u^{t+1} = h_t(m^2, .., m^t, y) ----
        const MatrixXd& sigma_t = se_states[t - 1].sigma;  // cov(G, R_1..R_{t-1})
        ChannelPosteriorContext hctx(sigma_t, inst.channel);
        std::vector<double> urow(t, 0.0);
        VectorXd ut(n);
        if (inst.channel.variant == ChannelSpec::Variant::Linear) {
            ut = hctx.w_full[tf] * inst.y;
            for (int k = 1; k <= tf; ++k)
                ut += (hctx.w_full[k - 1] - hctx.w_r[k - 1]) * H.m[k];
            urow[0] = hctx.w_full[tf];  // d/dm_1 through y = m_1 + eps
            for (int k = 1; k <= tf; ++k) urow[k] = hctx.w_full[k - 1] - hctx.w_r[k - 1];
        } else {
            VectorXd rhat = VectorXd::Zero(n);
            for (int k = 1; k <= tf; ++k) rhat += hctx.w_r[k - 1] * H.m[k];
            double mean_drhat = 0.0, mean_h2 = 0.0;
            for (int i = 0; i < n; ++i) {
                ChannelDenoiserScalar s = h_onebit_scalar(rhat[i], hctx.sigma_hat2, inst.y[i]);
                ut[i] = s.value;
                mean_drhat += s.drhat;
                mean_h2 += s.value * s.value;
            }
            mean_drhat /= n;
            mean_h2 /= n;
            urow[0] = mean_h2 / hctx.sigma_hat2;  // Stein's lemma for d/dm_1
            for (int k = 1; k <= tf; ++k) urow[k] = mean_drhat * hctx.w_r[k - 1];
        }
        H.u.push_back(std::move(ut));
        u_rows.push_back(std::move(urow));
    }
    return H;
}

// Squared-distance gaps between the RI-GAMP iterates and their aux-AMP
// counterparts, per iteration t = 1..T.
struct ClosenessGaps {
    std::vector<double> x, xhat, r, s;
};

inline ClosenessGaps closeness_report(const IterateHistory& main_h, const AuxHistory& aux,
                                      const GLMInstance& inst,
                                      const std::vector<SEState>& se_states) {
    const int d = inst.d(), n = inst.n();
    const VectorXd& mu = se_states.back().mu;
    ClosenessGaps g;
    // Each series is clamped independently: the solver skips the channel
    // half-step on its terminating iteration, so r has one fewer entry.
    const int aux_t = static_cast<int>(aux.z.size()) - 1;  // z^{t+1} available up to here
    int tx = std::min<int>({static_cast<int>(main_h.x.size()), aux_t,
                            static_cast<int>(mu.size())});
    for (int t = 1; t <= tx; ++t)
        g.x.push_back((main_h.x[t - 1] - (aux.z[t] + mu[t - 1] * inst.x_star)).squaredNorm() / d);
    int txh = std::min<int>(static_cast<int>(main_h.xhat.size()),
                            static_cast<int>(aux.v.size()) - 1);
    for (int t = 1; t <= txh; ++t)
        g.xhat.push_back((main_h.xhat[t - 1] - aux.v[t]).squaredNorm() / d);
    int tr = std::min<int>(static_cast<int>(main_h.r.size()),
                           static_cast<int>(aux.m.size()) - 1);
    for (int t = 1; t <= tr; ++t)
        g.r.push_back((main_h.r[t - 1] - aux.m[t]).squaredNorm() / n);
    int ts = std::min<int>(static_cast<int>(main_h.s.size()),
                           static_cast<int>(aux.u.size()) - 1);
    for (int t = 1; t <= ts; ++t)
        g.s.push_back((main_h.s[t - 1] - aux.u[t]).squaredNorm() / n);
    return g;
}

}  // namespace rigamp
