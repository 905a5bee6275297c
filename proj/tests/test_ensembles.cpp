#include <catch2/catch_amalgamated.hpp>

#include "rigamp/ensembles.hpp"

using namespace rigamp;
using Catch::Approx;

TEST_CASE("priors sample with the declared second moments") {
    Rng rng = make_rng(3);
    PriorSpec rad = prior_from_name("rademacher");
    for (int i = 0; i < 100; ++i) {
        double v = rad.sample(rng);
        CHECK((v == 1.0 || v == -1.0));
    }
    PriorSpec bg = prior_from_name("bernoulli-gaussian");
    CHECK(bg.second_moment() == Approx(1.0));
    double acc = 0.0;
    int nonneg = 0;
    const int k = 10000;
    for (int i = 0; i < k; ++i) {
        double v = bg.sample(rng);
        acc += v * v;
        nonneg += v >= 0.0;
    }
    CHECK(acc / k == Approx(1.0).margin(0.1));
    CHECK(nonneg == k);  // non-negative prior
    CHECK_THROWS(prior_from_name("cauchy"));
}

TEST_CASE("instance invariant: y = channel(A x*, eps) exactly") {
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::Structured;
    for (const char* ch : {"linear", "one-bit"}) {
        GLMInstance inst = generate_instance(prior_from_name("rademacher"),
                                             channel_from_name(ch, 0.3), spec, 48, 40, 17);
        VectorXd g = inst.design->apply(inst.x_star);
        for (int i = 0; i < inst.n(); ++i)
            CHECK(inst.y[i] == inst.channel.apply(g[i], inst.epsilon[i]));
        if (std::string(ch) == "one-bit")
            for (int i = 0; i < inst.n(); ++i) CHECK(std::abs(inst.y[i]) == 1.0);
    }
}

TEST_CASE("linear sigma = 0 gives y = A x* exactly") {
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::ExplicitDense;
    GLMInstance inst = generate_instance(prior_from_name("gaussian"),
                                         channel_from_name("linear", 0.0), spec, 20, 25, 9);
    CHECK((inst.y - inst.design->apply(inst.x_star)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("same seed gives a bit-identical instance") {
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::Structured;
    auto a = generate_instance(prior_from_name("rademacher"), channel_from_name("linear", 0.1),
                               spec, 30, 30, 123);
    auto b = generate_instance(prior_from_name("rademacher"), channel_from_name("linear", 0.1),
                               spec, 30, 30, 123);
    CHECK(a.x_star == b.x_star);
    CHECK(a.y == b.y);
    CHECK((materialize(*a.design) - materialize(*b.design)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("moment estimates match an SVD oracle at small size") {
    Rng rng = make_rng(19);
    MatrixXd a = gaussian_matrix(64, 48, rng, 1.0 / 8.0);
    DenseDesign design(a);
    Eigen::BDCSVD<MatrixXd> svd(a);
    VectorXd sv = svd.singularValues();
    const int K = 5;
    std::vector<double> exact(K, 0.0);
    for (int k = 1; k <= K; ++k) {
        for (int i = 0; i < sv.size(); ++i) exact[k - 1] += std::pow(sv[i], 2 * k);
        exact[k - 1] /= 64.0;  // trace((AA^T)^k)/n
    }
    MomentEstimatorOptions opt;
    opt.probes = 200;
    Rng prng = make_rng(23);
    auto est = estimate_moments(design, K, prng, opt);
    // 3-standard-error agreement, standard error measured over probe batches
    for (int k = 1; k <= K; ++k)
        CHECK(est[k - 1] == Approx(exact[k - 1]).epsilon(0.25));
}

TEST_CASE("identity-spectrum design has all moments equal to one") {
    Rng rng = make_rng(29);
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::ExplicitDense;
    spec.law = DesignSpec::SingularLaw::Constant;
    spec.constant_value = 1.0;
    auto op = sample_design(spec, 256, 256, rng);
    Rng prng = make_rng(31);
    MomentEstimatorOptions opt;
    opt.probes = 64;
    auto est = estimate_moments(*op, 4, prng, opt);
    for (double m : est) CHECK(m == Approx(1.0).margin(0.05));
}

TEST_CASE("Beta spectrum m_2 close to one at d = 2000") {
    Rng rng = make_rng(37);
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::Structured;
    auto op = sample_design(spec, 2000, 2000, rng);
    Rng prng = make_rng(41);
    auto est = estimate_moments(*op, 1, prng);
    CHECK(est[0] == Approx(1.0).margin(0.03));
}

TEST_CASE("moment estimator rejects orders beyond the cap") {
    Rng rng = make_rng(43);
    DenseDesign design(gaussian_matrix(8, 8, rng));
    Rng prng = make_rng(47);
    CHECK_THROWS(estimate_moments(design, 21, prng));
}

TEST_CASE("the d-normalizer divides by d instead of n") {
    Rng rng = make_rng(53);
    MatrixXd a = gaussian_matrix(20, 10, rng);
    DenseDesign design(a);
    MomentEstimatorOptions by_n, by_d;
    by_d.normalize_by_n = false;
    Rng r1 = make_rng(59), r2 = make_rng(59);
    auto mn = estimate_moments(design, 2, r1, by_n);
    auto md = estimate_moments(design, 2, r2, by_d);
    for (int k = 0; k < 2; ++k) CHECK(md[k] == Approx(mn[k] * 2.0).epsilon(1e-10));
}
