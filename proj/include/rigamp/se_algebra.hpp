#pragma once

#include <stdexcept>
#include <vector>

#include "rigamp/cumulants.hpp"
#include "rigamp/util.hpp"

namespace rigamp {

// Matrix algebra shared by the Onsager-coefficient computation, the empirical
// state-evolution updates inside the solver, and the deterministic
// state-evolution recursion. All matrices follow the paper-side layout:
// Psi_{t+1}, Phi_{t+1} are (t+1) x (t+1) lower-triangular, Psi with zero
// first row and column, Phi with zero first row and zero diagonal.

// Psi_{t+1} from derivative rows: fx_rows[i-1] holds (<d_1 xhat^i>, ..,
// <d_i xhat^i>) for i = 1..t. Rows shorter than t are allowed (trailing
// entries treated as absent only if the list itself is shorter); a missing
// last row (f_t not yet evaluated) is representable by passing t rows where
// the caller simply truncates the list.
inline MatrixXd build_psi(const std::vector<std::vector<double>>& fx_rows, int dim) {
    MatrixXd psi = MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < fx_rows.size(); ++i) {
        if (static_cast<int>(i) + 2 > dim) break;
        const auto& row = fx_rows[i];
        if (row.size() != i + 1) throw std::invalid_argument("psi row length mismatch");
        for (std::size_t k = 0; k < row.size(); ++k) psi(i + 1, k + 1) = row[k];
    }
    return psi;
}

// Phi_{t+1} from s-derivative rows: sg[i-1] = <d_g s^i>, sr_rows[i-1] holds
// (<d_1 s^i>, .., <d_{i-1} s^i>) for i = 1..t.
inline MatrixXd build_phi(const std::vector<double>& sg,
                          const std::vector<std::vector<double>>& sr_rows, int dim) {
    if (sg.size() != sr_rows.size()) throw std::invalid_argument("phi row count mismatch");
    MatrixXd phi = MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < sg.size(); ++i) {
        if (static_cast<int>(i) + 2 > dim) break;
        phi(i + 1, 0) = sg[i];
        const auto& row = sr_rows[i];
        if (row.size() != i) throw std::invalid_argument("phi row length mismatch");
        for (std::size_t k = 0; k < row.size(); ++k) phi(i + 1, k + 1) = row[k];
    }
    return phi;
}

namespace detail {

// Powers P^0, P^1, ... of a strictly-lower-triangular product matrix, stopping
// once the power vanishes (nilpotency) or max_count matrices are produced.
inline std::vector<MatrixXd> nilpotent_powers(const MatrixXd& p, int max_count) {
    std::vector<MatrixXd> powers;
    powers.push_back(MatrixXd::Identity(p.rows(), p.cols()));
    for (int i = 1; i < max_count; ++i) {
        MatrixXd next = powers.back() * p;
        if (next.cwiseAbs().maxCoeff() == 0.0) break;
        powers.push_back(std::move(next));
    }
    return powers;
}

}  // namespace detail

// M^alpha_{t+1} = sum_{j>=0} kappa_{2(j+1)} Psi (Phi Psi)^j. Terms with a
// vanished (nilpotent) power are dropped, so cumulants are only consumed for
// orders with a structurally nonzero contribution; a genuinely needed but
// missing order raises through CumulantSet::kappa with the order named.
inline MatrixXd onsager_m_alpha(const MatrixXd& psi, const MatrixXd& phi,
                                const CumulantSet& cum, int max_j) {
    auto powers = detail::nilpotent_powers(phi * psi, max_j + 1);
    MatrixXd m = MatrixXd::Zero(psi.rows(), psi.cols());
    for (std::size_t j = 0; j < powers.size(); ++j) {
        MatrixXd term = psi * powers[j];
        if (term.cwiseAbs().maxCoeff() == 0.0) continue;
        m += cum.kappa(static_cast<int>(j) + 1) * term;
    }
    return m;
}

inline MatrixXd onsager_m_beta(const MatrixXd& psi, const MatrixXd& phi, const CumulantSet& cum,
                               double delta, int max_j) {
    auto powers = detail::nilpotent_powers(psi * phi, max_j + 1);
    MatrixXd m = MatrixXd::Zero(psi.rows(), psi.cols());
    for (std::size_t j = 0; j < powers.size(); ++j) {
        MatrixXd term = phi * powers[j];
        if (term.cwiseAbs().maxCoeff() == 0.0) continue;
        m += cum.kappa(static_cast<int>(j) + 1) * term;
    }
    return delta * m;
}

// alpha_{t,1..t} = last row of M^alpha_{t+1}, columns 2..t+1.
inline VectorXd alpha_from_m(const MatrixXd& m_alpha) {
    const int t = static_cast<int>(m_alpha.rows()) - 1;
    return m_alpha.row(t).segment(1, t).transpose();
}

// beta_{t,1..t-1} = last row of M^beta_{t+1}, columns 2..t.
inline VectorXd beta_from_m(const MatrixXd& m_beta) {
    const int t = static_cast<int>(m_beta.rows()) - 1;
    return m_beta.row(t).segment(1, t - 1).transpose();
}

// Sigma_{t+1} = sum_j kappa_{2(j+1)} Xi^(j) with Xi^(0) = Gamma and
// Xi^(j) = sum_i P^i Gamma (P^T)^(j-i) + sum_i P^i Psi Delta Psi^T (P^T)^(j-i-1),
// P = Psi Phi.
inline MatrixXd se_sigma_update(const MatrixXd& gamma, const MatrixXd& delta_mat,
                                const MatrixXd& psi, const MatrixXd& phi,
                                const CumulantSet& cum, int max_j) {
    auto powers = detail::nilpotent_powers(psi * phi, max_j + 2);
    const int np = static_cast<int>(powers.size());
    MatrixXd core = psi * delta_mat * psi.transpose();
    MatrixXd sigma = MatrixXd::Zero(gamma.rows(), gamma.cols());
    for (int j = 0; j <= max_j; ++j) {
        MatrixXd xi = MatrixXd::Zero(gamma.rows(), gamma.cols());
        bool nonzero = false;
        for (int i = 0; i <= j; ++i) {
            if (i < np && j - i < np) {
                xi += powers[i] * gamma * powers[j - i].transpose();
                nonzero = true;
            }
            if (i < np && j - i - 1 >= 0 && j - i - 1 < np) {
                xi += powers[i] * core * powers[j - i - 1].transpose();
                nonzero = true;
            }
        }
        if (!nonzero || xi.cwiseAbs().maxCoeff() == 0.0) continue;
        sigma += cum.kappa(j + 1) * xi;
    }
    return sigma;
}

// Omega'_{t+2} = delta * sum_j kappa_{2(j+1)} Theta^(j): the dual of
// se_sigma_update with the roles of (Gamma, Psi) and (Delta, Phi) swapped.
inline MatrixXd se_omega_prime(const MatrixXd& gamma, const MatrixXd& delta_mat,
                               const MatrixXd& psi, const MatrixXd& phi, const CumulantSet& cum,
                               double delta, int max_j) {
    return delta * se_sigma_update(delta_mat, gamma, phi, psi, cum, max_j);
}

// mu_{t+1} = (Mbar^beta_{t+2})_{t+2, 1}.
inline double se_mu_next(const MatrixXd& psi, const MatrixXd& phi, const CumulantSet& cum,
                         double delta, int max_j) {
    MatrixXd m = onsager_m_beta(psi, phi, cum, delta, max_j);
    return m(m.rows() - 1, 0);
}

// Embed a matrix into the top-left corner of a dim x dim zero matrix.
inline MatrixXd embed_top_left(const MatrixXd& m, int dim) {
    MatrixXd out = MatrixXd::Zero(dim, dim);
    out.topLeftCorner(m.rows(), m.cols()) = m;
    return out;
}

}  // namespace rigamp
