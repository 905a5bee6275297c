#include <catch2/catch_amalgamated.hpp>

#include "rigamp/aux_amp.hpp"

using namespace rigamp;

namespace {

struct CoupledRun {
    RigampResult main;
    AuxHistory aux;
    std::vector<SEState> se;
    GLMInstance inst;
};

CoupledRun coupled_run(int n, int d, int T, unsigned seed) {
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::Structured;
    CoupledRun out{.main = {},
                   .aux = {},
                   .se = {},
                   .inst = generate_instance(prior_from_name("rademacher"),
                                             channel_from_name("linear", 0.3), spec, n, d, seed)};
    CumulantSet cum = beta_reference_cumulants(2 * T + 6, out.inst.delta());
    out.se = se_run(out.inst.prior, out.inst.channel, cum, out.inst.delta(), T + 1);
    RigampOptions opts;
    opts.t_max = T;
    opts.tol = 0.0;
    opts.deterministic_se = true;
    opts.se_states = &out.se;
    out.main = rigamp_run(out.inst, cum, opts);
    out.aux = aux_amp_run(out.inst, cum, out.se, T + 1);
    return out;
}

}  // namespace

TEST_CASE("s^1 and u^2 coincide exactly for the linear channel") {
    CoupledRun run = coupled_run(200, 200, 3, 5);
    ClosenessGaps g = closeness_report(run.main.history, run.aux, run.inst, run.se);
    REQUIRE(!g.s.empty());
    CHECK(g.s[0] == 0.0);  // both are y itself
}

TEST_CASE("all four gap series are small at moderate dimension") {
    CoupledRun run = coupled_run(1000, 1000, 4, 7);
    REQUIRE(run.main.termination == "max-iters");
    ClosenessGaps g = closeness_report(run.main.history, run.aux, run.inst, run.se);
    REQUIRE(g.x.size() >= 4);
    REQUIRE(g.xhat.size() >= 4);
    REQUIRE(g.r.size() >= 3);
    REQUIRE(g.s.size() >= 3);
    for (double v : g.x) CHECK(v <= 2e-2);
    for (double v : g.xhat) CHECK(v <= 2e-2);
    for (double v : g.r) CHECK(v <= 2e-2);
    for (double v : g.s) CHECK(v <= 2e-2);
}

TEST_CASE("aux recursion validates the SE horizon") {
    DesignSpec spec;
    spec.variant = DesignSpec::Variant::Structured;
    GLMInstance inst = generate_instance(prior_from_name("rademacher"),
                                         channel_from_name("linear", 0.3), spec, 50, 50, 9);
    CumulantSet cum = beta_reference_cumulants(12, 1.0);
    auto se = se_run(inst.prior, inst.channel, cum, 1.0, 2);
    CHECK_THROWS_AS(aux_amp_run(inst, cum, se, 6), std::invalid_argument);
}
