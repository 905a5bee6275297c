#pragma once

#include <vector>

#include "rigamp/rigamp.hpp"

namespace rigamp {

// GAMP baseline: the RI-GAMP recursion run with the cumulant sequence
// truncated to (kappa_2, 0, 0, ...) and denoisers that look only at the most
// recent iterate. On an i.i.d. Gaussian design this is exactly GAMP; on other
// spectra it is the mismatched baseline.
inline RigampResult gamp_run(const GLMInstance& inst, const CumulantSet& cum,
                             RigampOptions opts = {}) {
    opts.last_iterate_only = true;
    return rigamp_run(inst, cum.truncated_to_gaussian(), opts);
}

// LMMSE baseline: xhat = A^T (A A^T + ridge I)^{-1} y. The default ridge is
// the literal noise level sigma; use_sigma_squared switches to sigma^2. The
// ridge is floored to keep the system well-posed for sigma = 0.
inline VectorXd lmmse_estimate(const GLMInstance& inst, bool use_sigma_squared = false) {
    const int n = inst.n();
    double sigma = inst.channel.sigma;
    double ridge = std::max(use_sigma_squared ? sigma * sigma : sigma, 1e-12);
    MatrixXd a = materialize(*inst.design);
    MatrixXd gram = a * a.transpose();
    gram.diagonal().array() += ridge;
    return a.transpose() * gram.ldlt().solve(inst.y);
}

// Subgradient baseline for one-bit observations: minimize the hinge-type
// objective sum_i max(0, -y_i (A x)_i) over the sphere ||x|| = sqrt(d * E{X*^2}),
// step size 1/sqrt(iter), returning the iterate with the fewest sign
// violations seen along the way.
struct SubgradientOptions {
    int iters = 500;
    VectorXd x0;  // optional start point (default: random on the sphere)
};

inline VectorXd subgradient_onebit(const GLMInstance& inst, std::uint64_t seed,
                                   const SubgradientOptions& opts = {}) {
    const int n = inst.n(), d = inst.d();
    const double radius = std::sqrt(d * inst.prior.second_moment());
    VectorXd x;
    if (opts.x0.size() == d) {
        x = opts.x0;
    } else {
        Rng rng = make_rng(hash_combine(seed, 0x5B6));
        x = gaussian_vector(d, rng);
    }
    x *= radius / x.norm();
    VectorXd best = x;
    double best_obj = std::numeric_limits<double>::infinity();
    long best_viol = std::numeric_limits<long>::max();
    for (int it = 1; it <= opts.iters; ++it) {
        VectorXd ax = inst.design->apply(x);
        VectorXd margin = inst.y.cwiseProduct(ax);  // want every entry >= 0
        long viol = 0;
        double obj = 0.0;
        VectorXd mask(n);
        for (int i = 0; i < n; ++i) {
            bool bad = margin[i] < 0.0;
            mask[i] = bad ? 1.0 : 0.0;
            if (bad) {
                ++viol;
                obj -= margin[i];
            }
        }
        if (viol < best_viol || (viol == best_viol && obj < best_obj)) {
            best_viol = viol;
            best_obj = obj;
            best = x;
        }
        if (viol == 0) break;
        // subgradient of sum_i max(0, -y_i (A x)_i)
        VectorXd grad = inst.design->apply_transpose(-inst.y.cwiseProduct(mask));
        double gn = grad.norm();
        if (gn == 0.0) break;
        x -= (1.0 / std::sqrt(static_cast<double>(it))) * radius * grad / gn;
        x *= radius / x.norm();
    }
    return best;
}

}  // namespace rigamp
