#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigamp/util.hpp"

namespace rigamp {

// Even spectral moments m_{2k} of A A^T together with the matching
// rectangular free cumulants kappa_{2k}, for k = 1..K.
struct CumulantSet {
    enum class Source { ClosedForm, EstimatedFromMatrix, UserSupplied };

    double delta = 1.0;  // aspect ratio n/d
    std::vector<double> moments;
    std::vector<double> cumulants;
    Source source = Source::UserSupplied;

    int order() const { return static_cast<int>(cumulants.size()); }

    // kappa_{2k}; k is 1-based.
    double kappa(int k) const {
        if (k < 1 || k > order())
            throw std::runtime_error("cumulant order kappa_" + std::to_string(2 * k) +
                                     " not available (have K=" + std::to_string(order()) + ")");
        return cumulants[k - 1];
    }

    // Keep only kappa_2; higher orders become exact zeros, padded out far
    // enough that any structurally-required order is available.
    CumulantSet truncated_to_gaussian(std::size_t pad_orders = 128) const {
        CumulantSet out = *this;
        out.cumulants.assign(std::max(pad_orders, out.cumulants.size()), 0.0);
        out.cumulants[0] = cumulants.at(0);
        out.moments = cumulants_to_moments(out.cumulants, out.delta);
        return out;
    }

    static std::vector<double> moments_to_cumulants(const std::vector<double>& moments,
                                                    double delta);
    static std::vector<double> cumulants_to_moments(const std::vector<double>& cumulants,
                                                    double delta);

    static CumulantSet from_moments(std::vector<double> moments, double delta, Source src) {
        CumulantSet cs;
        cs.delta = delta;
        cs.cumulants = moments_to_cumulants(moments, delta);
        cs.moments = std::move(moments);
        cs.source = src;
        return cs;
    }

    nlohmann::json to_json() const;
    static CumulantSet from_json(const nlohmann::json& j);
};

namespace detail {

// Dense polynomial coefficients c[0..K], arithmetic truncated at degree K.
using Poly = std::vector<double>;

inline Poly poly_mul(const Poly& a, const Poly& b, int max_deg) {
    Poly out(max_deg + 1, 0.0);
    for (int i = 0; i <= max_deg && i < static_cast<int>(a.size()); ++i) {
        if (a[i] == 0.0) continue;
        for (int j = 0; i + j <= max_deg && j < static_cast<int>(b.size()); ++j)
            out[i + j] += a[i] * b[j];
    }
    return out;
}

// P(z) = z (delta*M(z) + 1)(M(z) + 1) where M(z) = sum_k m_{2k} z^k.
inline Poly base_poly(const std::vector<double>& moments, double delta, int max_deg) {
    Poly dm(max_deg + 1, 0.0), m1(max_deg + 1, 0.0);
    dm[0] = 1.0;
    m1[0] = 1.0;
    for (int k = 1; k <= max_deg && k <= static_cast<int>(moments.size()); ++k) {
        dm[k] = delta * moments[k - 1];
        m1[k] = moments[k - 1];
    }
    Poly prod = poly_mul(dm, m1, max_deg);
    Poly out(max_deg + 1, 0.0);
    for (int i = 0; i + 1 <= max_deg; ++i) out[i + 1] = prod[i];
    return out;
}

}  // namespace detail

// kappa_{2k} = m_{2k} - [z^k] sum_{j=1}^{k-1} kappa_{2j} P(z)^j.
inline std::vector<double> CumulantSet::moments_to_cumulants(const std::vector<double>& moments,
                                                             double delta) {
    const int K = static_cast<int>(moments.size());
    if (K == 0) throw std::invalid_argument("moments must be non-empty");
    for (double m : moments)
        if (!std::isfinite(m)) throw std::invalid_argument("non-finite moment");
    detail::Poly p = detail::base_poly(moments, delta, K);
    std::vector<double> kappa(K);
    detail::Poly p_pow(K + 1, 0.0);
    p_pow[0] = 1.0;
    detail::Poly sum(K + 1, 0.0);  // running sum_{j<=J} kappa_{2j} P^j
    kappa[0] = moments[0];
    for (int k = 2; k <= K; ++k) {
        // fold the j = k-1 term into the running sum
        p_pow = detail::poly_mul(p_pow, p, K);
        for (int i = 0; i <= K; ++i) sum[i] += kappa[k - 2] * p_pow[i];
        kappa[k - 1] = moments[k - 1] - sum[k];
    }
    return kappa;
}

// Forward solve of the same recursion: [z^k] of P^j only involves moments of
// order < k, so m_{2k} is determined by the previous moments.
inline std::vector<double> CumulantSet::cumulants_to_moments(const std::vector<double>& cumulants,
                                                             double delta) {
    const int K = static_cast<int>(cumulants.size());
    if (K == 0) throw std::invalid_argument("cumulants must be non-empty");
    for (double c : cumulants)
        if (!std::isfinite(c)) throw std::invalid_argument("non-finite cumulant");
    std::vector<double> moments(K, 0.0);
    moments[0] = cumulants[0];
    for (int k = 2; k <= K; ++k) {
        detail::Poly p = detail::base_poly(moments, delta, K);  // uses m up to k-1 only
        detail::Poly p_pow(K + 1, 0.0);
        p_pow[0] = 1.0;
        double corr = 0.0;
        for (int j = 1; j <= k - 1; ++j) {
            p_pow = detail::poly_mul(p_pow, p, K);
            corr += cumulants[j - 1] * p_pow[k];
        }
        moments[k - 1] = cumulants[k - 1] + corr;
    }
    return moments;
}

inline nlohmann::json CumulantSet::to_json() const {
    const char* src = source == Source::ClosedForm          ? "closed-form"
                      : source == Source::EstimatedFromMatrix ? "estimated-from-matrix"
                                                              : "user-supplied";
    return {{"delta", delta}, {"moments", moments}, {"cumulants", cumulants}, {"source", src}};
}

inline CumulantSet CumulantSet::from_json(const nlohmann::json& j) {
    CumulantSet cs;
    cs.delta = j.at("delta").get<double>();
    cs.moments = j.at("moments").get<std::vector<double>>();
    cs.cumulants = j.at("cumulants").get<std::vector<double>>();
    std::string src = j.value("source", "user-supplied");
    cs.source = src == "closed-form"             ? Source::ClosedForm
                : src == "estimated-from-matrix" ? Source::EstimatedFromMatrix
                                                 : Source::UserSupplied;
    return cs;
}

// Closed-form even moments of the sqrt(6)*Beta(1,2) singular value law:
// 6^k / ((k+1)(2k+1)), scaled by 1/delta when delta >= 1 (the spectrum of
// A A^T then carries a zero-mass of weight 1 - 1/delta).
inline std::vector<double> beta_reference_moments(int K, double delta) {
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    std::vector<double> m(K);
    double pw = 1.0;
    double scale = delta > 1.0 ? 1.0 / delta : 1.0;
    for (int k = 1; k <= K; ++k) {
        pw *= 6.0;
        m[k - 1] = scale * pw / (static_cast<double>(k + 1) * (2 * k + 1));
    }
    return m;
}

inline CumulantSet beta_reference_cumulants(int K, double delta) {
    return CumulantSet::from_moments(beta_reference_moments(K, delta), delta,
                                     CumulantSet::Source::ClosedForm);
}

// Cumulants of the iid N(0, 1/n) ensemble under the trace/n moment
// convention: kappa_2 = 1/delta and all higher orders vanish.
inline CumulantSet gaussian_design_cumulants(int K, double delta) {
    std::vector<double> kappa(K, 0.0);
    kappa[0] = 1.0 / delta;
    CumulantSet cs;
    cs.delta = delta;
    cs.cumulants = kappa;
    cs.moments = CumulantSet::cumulants_to_moments(kappa, delta);
    cs.source = CumulantSet::Source::ClosedForm;
    return cs;
}

}  // namespace rigamp
