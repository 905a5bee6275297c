#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rigamp/cumulants.hpp"
#include "rigamp/design.hpp"
#include "rigamp/util.hpp"

namespace rigamp {

// ---- priors ----

struct PriorSpec {
    enum class Variant { Rademacher, StandardGaussian, BernoulliGaussianNonneg };
    Variant variant = Variant::Rademacher;
    double lambda = 1.0 / 6.0;  // Bernoulli-Gaussian sparsity
    double sigma2 = 6.0;        // Bernoulli-Gaussian slab variance

    // E{X*^2}
    double second_moment() const {
        switch (variant) {
            case Variant::Rademacher:
            case Variant::StandardGaussian:
                return 1.0;
            case Variant::BernoulliGaussianNonneg:
                return lambda * sigma2;
        }
        return 1.0;
    }

    double sample(Rng& rng) const {
        switch (variant) {
            case Variant::Rademacher:
                return (rng() & 1u) ? 1.0 : -1.0;
            case Variant::StandardGaussian: {
                std::normal_distribution<double> normal(0.0, 1.0);
                return normal(rng);
            }
            case Variant::BernoulliGaussianNonneg: {
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                if (unif(rng) >= lambda) return 0.0;
                std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
                return std::abs(normal(rng));
            }
        }
        return 0.0;
    }
};

inline PriorSpec prior_from_name(const std::string& name) {
    PriorSpec p;
    if (name == "rademacher")
        p.variant = PriorSpec::Variant::Rademacher;
    else if (name == "gaussian")
        p.variant = PriorSpec::Variant::StandardGaussian;
    else if (name == "bernoulli-gaussian")
        p.variant = PriorSpec::Variant::BernoulliGaussianNonneg;
    else
        throw std::invalid_argument("unknown prior: " + name);
    return p;
}

// ---- channels ----

struct ChannelSpec {
    enum class Variant { Linear, OneBitSign };
    Variant variant = Variant::Linear;
    double sigma = 0.0;  // linear-channel noise std

    double apply(double g, double eps) const {
        if (variant == Variant::Linear) return g + eps;
        return g >= 0.0 ? 1.0 : -1.0;
    }
};

inline ChannelSpec channel_from_name(const std::string& name, double sigma) {
    ChannelSpec c;
    if (name == "linear") {
        c.variant = ChannelSpec::Variant::Linear;
        c.sigma = sigma;
    } else if (name == "one-bit") {
        c.variant = ChannelSpec::Variant::OneBitSign;
        c.sigma = 0.0;
    } else {
        throw std::invalid_argument("unknown channel: " + name);
    }
    return c;
}

// ---- designs ----

struct DesignSpec {
    enum class Variant { ExplicitDense, Structured, IidGaussian };
    enum class SingularLaw { Beta12Scaled, Constant, Custom, MarchenkoPasturViaGaussian };

    Variant variant = Variant::ExplicitDense;
    SingularLaw law = SingularLaw::Beta12Scaled;
    double constant_value = 1.0;
    std::vector<double> custom_values;
};

// Haar orthogonal matrix: QR of a Gaussian matrix with the columns of Q
// sign-corrected by the diagonal of R (plain QR is biased).
inline MatrixXd sample_haar_orthogonal(int dim, Rng& rng) {
    MatrixXd g = gaussian_matrix(dim, dim, rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ();
    MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

// First `cols` columns of a Haar orthogonal dim x dim matrix (Haar frame on
// the Stiefel manifold); avoids materializing the full square factor.
inline MatrixXd sample_haar_frame(int dim, int cols, Rng& rng) {
    MatrixXd g = gaussian_matrix(dim, cols, rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(dim, cols);
    MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (int j = 0; j < cols; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

// sqrt(6) * Beta(1,2); the scaling gives a unit second moment.
inline double sample_beta12_scaled(Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return std::sqrt(6.0) * (1.0 - std::sqrt(unif(rng)));
}

inline std::vector<double> sample_singular_values(const DesignSpec& spec, int count, Rng& rng) {
    std::vector<double> sv(count);
    switch (spec.law) {
        case DesignSpec::SingularLaw::Beta12Scaled:
            for (double& v : sv) v = sample_beta12_scaled(rng);
            break;
        case DesignSpec::SingularLaw::Constant:
            for (double& v : sv) v = spec.constant_value;
            break;
        case DesignSpec::SingularLaw::Custom:
            if (static_cast<int>(spec.custom_values.size()) != count)
                throw std::invalid_argument("custom singular value list has wrong length");
            sv = spec.custom_values;
            break;
        case DesignSpec::SingularLaw::MarchenkoPasturViaGaussian:
            throw std::logic_error("MP law is realized by the iid-gaussian design variant");
    }
    return sv;
}

inline std::unique_ptr<DesignOperator> sample_design(const DesignSpec& spec, int n, int d,
                                                     Rng& rng) {
    if (n < 1 || d < 1) throw std::invalid_argument("n, d must be >= 1");
    if (spec.variant == DesignSpec::Variant::IidGaussian ||
        spec.law == DesignSpec::SingularLaw::MarchenkoPasturViaGaussian) {
        MatrixXd a = gaussian_matrix(n, d, rng, 1.0 / std::sqrt(static_cast<double>(n)));
        return std::make_unique<DenseDesign>(std::move(a));
    }
    const int m = std::min(n, d);
    std::vector<double> sv = sample_singular_values(spec, m, rng);
    if (spec.variant == DesignSpec::Variant::Structured)
        return std::make_unique<StructuredDctDesign>(n, d, std::move(sv), rng);
    // explicit dense: A = O^T Lambda Q needs only the first m columns of O
    // and the first m rows of Q.
    MatrixXd o_cols = sample_haar_frame(n, m, rng);
    MatrixXd q_rows = sample_haar_frame(d, m, rng).transpose();
    Eigen::Map<const VectorXd> lam(sv.data(), m);
    MatrixXd a = o_cols * lam.asDiagonal() * q_rows;
    return std::make_unique<DenseDesign>(std::move(a), std::move(sv));
}

// ---- full problem instances ----

struct GLMInstance {
    std::unique_ptr<DesignOperator> design;
    VectorXd x_star;   // length d
    VectorXd epsilon;  // length n
    VectorXd y;        // length n
    PriorSpec prior;
    ChannelSpec channel;
    std::uint64_t seed = 0;

    int n() const { return design->rows(); }
    int d() const { return design->cols(); }
    double delta() const { return design->delta(); }
};

inline GLMInstance generate_instance(const PriorSpec& prior, const ChannelSpec& channel,
                                     const DesignSpec& design_spec, int n, int d,
                                     std::uint64_t seed) {
    GLMInstance inst;
    inst.prior = prior;
    inst.channel = channel;
    inst.seed = seed;
    // Independent sub-streams so that e.g. switching the channel does not
    // perturb the design or the signal.
    Rng rng_design = make_rng(hash_combine(seed, 0xA11CE));
    Rng rng_signal = make_rng(hash_combine(seed, 0xB0B));
    Rng rng_noise = make_rng(hash_combine(seed, 0xCAFE));
    inst.design = sample_design(design_spec, n, d, rng_design);
    inst.x_star = VectorXd(d);
    for (int i = 0; i < d; ++i) inst.x_star[i] = prior.sample(rng_signal);
    // epsilon is sampled even for the one-bit channel (and ignored there), so
    // seeds produce aligned randomness across channel choices.
    inst.epsilon = gaussian_vector(n, rng_noise, channel.sigma > 0.0 ? channel.sigma : 1.0);
    if (channel.sigma == 0.0) inst.epsilon.setZero();
    VectorXd g = inst.design->apply(inst.x_star);
    inst.y = VectorXd(n);
    for (int i = 0; i < n; ++i) inst.y[i] = channel.apply(g[i], inst.epsilon[i]);
    return inst;
}

// ---- spectral moment estimation (Hutchinson-style alternating probes) ----

struct MomentEstimatorOptions {
    int probes = 32;
    // Divide ||s^k||^2 by n (trace-of-(AA^T)^k convention, default) or by d.
    bool normalize_by_n = true;
    int max_order = 20;  // cap: K*2 <= 40 applies of the operator
};

inline std::vector<double> estimate_moments(const DesignOperator& design, int K, Rng& rng,
                                            const MomentEstimatorOptions& opt = {}) {
    if (K < 1 || opt.probes < 1) throw std::invalid_argument("K and probes must be >= 1");
    if (K > opt.max_order)
        throw std::invalid_argument("moment order K=" + std::to_string(K) +
                                    " exceeds configured cap " + std::to_string(opt.max_order));
    const int n = design.rows();
    const double denom = opt.normalize_by_n ? static_cast<double>(n)
                                            : static_cast<double>(design.cols());
    std::vector<double> acc(K, 0.0);
    for (int p = 0; p < opt.probes; ++p) {
        VectorXd s = gaussian_vector(n, rng);
        double log_scale = 0.0;  // accumulated log of the renormalization factors
        for (int k = 1; k <= K; ++k) {
            s = (k % 2 == 1) ? design.apply_transpose(s) : design.apply(s);
            // ||s^k||^2 / denom estimates m_{2k}; track scale in log domain so
            // high powers of large spectra do not overflow.
            double nrm2 = s.squaredNorm();
            acc[k - 1] += std::exp(std::log(std::max(nrm2, 1e-300)) + 2.0 * log_scale -
                                   std::log(denom));
            if (k % 2 == 0 && nrm2 > 0.0) {
                double scale = std::sqrt(nrm2);
                s /= scale;
                log_scale += std::log(scale);
            }
        }
    }
    for (double& v : acc) v /= opt.probes;
    return acc;
}

inline CumulantSet estimate_cumulants(const DesignOperator& design, int K, Rng& rng,
                                      const MomentEstimatorOptions& opt = {}) {
    CumulantSet cs = CumulantSet::from_moments(estimate_moments(design, K, rng, opt),
                                               design.delta(),
                                               CumulantSet::Source::EstimatedFromMatrix);
    return cs;
}

}  // namespace rigamp
