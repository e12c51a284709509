#include <doctest.h>

#include <cmath>

#include "pme/error.hpp"
#include "pme/experiment.hpp"
#include "pme/long_run.hpp"
#include "pme/moments.hpp"

using namespace pme;

namespace {

ExperimentSpec small_spec(Design d, unsigned threads) {
    ExperimentSpec s;
    s.design = d;
    s.cells = {{40, 30}, {25, 20}};
    s.replications = 24;
    s.qs = {2, 3};
    s.deltas = {0.25, 0.5};
    s.seed = 31;
    s.threads = threads;
    return s;
}

}  // namespace

TEST_CASE("design names and descriptions") {
    VecmDesign v;
    CHECK(design_name(v) == "var1");
    v.model = Model::Varma11;
    v.r0 = 2;
    CHECK(design_name(v) == "varma");
    CHECK(design_description(v).find("r0=2") != std::string::npos);
    CHECK(design_name(VarDiffDesign{}) == "var_diff");
    CHECK(design_name(BivariateDesign{}) == "pb");
    CHECK(true_rank(VarDiffDesign{}) == 0);
    CHECK(true_rank(BivariateDesign{}) == 1);
    CHECK(variable_count(BivariateDesign{}) == 2);
    CHECK(variable_count(v) == 3);
}

TEST_CASE("summary invariants") {
    for (const Design& d : {Design{VecmDesign{}}, Design{VarDiffDesign{}}, Design{BivariateDesign{}}}) {
        const auto rep = run_experiment(small_spec(d, 1));
        CHECK(rep.cells.size() == 2);
        CHECK(rep.r0 == true_rank(d));
        for (const auto& cell : rep.cells) {
            CHECK(cell.generation_failures == 0);
            REQUIRE(cell.by_q.size() == 2);
            for (const auto& q : cell.by_q) {
                REQUIRE(q.selection.size() == 2);
                for (const auto& sel : q.selection) {
                    CHECK(sel.frequency.size() == static_cast<std::size_t>(rep.m) + 1);
                    double total = 0;
                    for (double f : sel.frequency) {
                        CHECK(f >= 0.0);
                        total += f;
                    }
                    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
                }
                CHECK(q.coefficients.size() == static_cast<std::size_t>(rep.r0 * (rep.m - rep.r0)));
                for (const auto& c : q.coefficients) {
                    CHECK(c.rmse * c.rmse >= c.bias * c.bias * (1 - 1e-12));
                    CHECK(c.size >= 0.0);
                    CHECK(c.size <= 1.0);
                    CHECK(c.power >= 0.0);
                    CHECK(c.power <= 1.0);
                    CHECK(c.mean_se > 0.0);
                    CHECK(c.count == rep.replications - q.failures);
                }
            }
        }
    }
}

TEST_CASE("coefficient names and truth") {
    VecmDesign d;
    d.r0 = 2;
    const auto rep = run_experiment(small_spec(d, 1));
    const auto& coefs = rep.cells[0].by_q[0].coefficients;
    REQUIRE(coefs.size() == 2);
    CHECK(coefs[0].name == "beta13");
    CHECK(coefs[1].name == "beta23");
    CHECK(coefs[0].truth == -1.0);
    VecmDesign d1;
    const auto rep1 = run_experiment(small_spec(d1, 1));
    const auto& c1 = rep1.cells[0].by_q[0].coefficients;
    REQUIRE(c1.size() == 2);
    CHECK(c1[0].name == "beta12");
    CHECK(c1[1].name == "beta13");
    CHECK(c1[0].truth == 0.0);
    CHECK(c1[1].truth == -1.0);
}

TEST_CASE("summaries agree with a replication-by-replication recomputation") {
    auto spec = small_spec(BivariateDesign{}, 2);
    spec.qs = {2};
    const auto rep = run_experiment(spec);
    const auto& coef = rep.cells[0].by_q[0].coefficients.at(0);
    double err = 0, err2 = 0;
    int reject = 0;
    for (int r = 0; r < spec.replications; ++r) {
        const auto sim = simulate_panel(spec.design, 40, 30, {spec.seed, 0, static_cast<std::uint64_t>(r)});
        const auto moments = pooled_covariance(sim.panel, make_plan(sim.panel, SubsampleRule::fixed(2)));
        const Matrix b = exact_identify(pme_basis(moments, 1), Normalized{});
        const double se = estimate_covariance(moments, b).std_errors(0, 0);
        const double e = b(1, 0) + 1.0;
        err += e;
        err2 += e * e;
        if (std::abs(e / se) > 1.96) ++reject;
    }
    CHECK(coef.bias == doctest::Approx(err / spec.replications).epsilon(1e-12));
    CHECK(coef.rmse == doctest::Approx(std::sqrt(err2 / spec.replications)).epsilon(1e-12));
    CHECK(coef.size == doctest::Approx(static_cast<double>(reject) / spec.replications));
}

TEST_CASE("power equals size when the alternative is the truth") {
    auto spec = small_spec(VecmDesign{}, 1);
    spec.power_shift = 0.0;
    const auto rep = run_experiment(spec);
    for (const auto& cell : rep.cells)
        for (const auto& q : cell.by_q)
            for (const auto& c : q.coefficients) CHECK(c.power == c.size);
}

TEST_CASE("reports do not depend on the thread count") {
    VecmDesign d;
    d.r0 = 2;
    const auto one = run_experiment(small_spec(d, 1));
    const auto three = run_experiment(small_spec(d, 3));
    const auto again = run_experiment(small_spec(d, 1));
    CHECK(one == three);
    CHECK(one == again);
    auto other = small_spec(d, 1);
    other.seed = 32;
    CHECK_FALSE(run_experiment(other) == one);
}

TEST_CASE("invalid runs and excessive failures throw") {
    auto spec = small_spec(VecmDesign{}, 1);
    spec.kappa = 0.01;  // infeasible loadings for every replication
    CHECK_THROWS_AS(run_experiment(spec), NumericalError);
    spec.max_failure_rate = 1.0;
    const auto rep = run_experiment(spec);
    CHECK(rep.cells[0].generation_failures == spec.replications);
    CHECK(rep.cells[0].by_q[0].coefficients[0].count == 0);

    auto bad = small_spec(VecmDesign{}, 1);
    bad.replications = 0;
    CHECK_THROWS_AS(run_experiment(bad), InputError);
    bad = small_spec(VecmDesign{}, 1);
    bad.cells.clear();
    CHECK_THROWS_AS(run_experiment(bad), InputError);
    bad = small_spec(VecmDesign{}, 1);
    bad.qs = {1};
    CHECK_THROWS_AS(run_experiment(bad), InputError);
}

TEST_CASE("two-variable design: the small-T bias vanishes as T grows") {
    // At T = 50 the O(1/T) bias is several Monte Carlo standard errors wide; by
    // T = 200 the mean estimate sits on the true coefficient.
    ExperimentSpec spec;
    spec.design = BivariateDesign{};
    spec.cells = {{500, 50}, {500, 200}};
    spec.replications = 200;
    spec.seed = 41;
    const auto rep = run_experiment(spec);
    const auto& short_t = rep.cells[0].by_q[0].coefficients.at(0);
    const auto& long_t = rep.cells[1].by_q[0].coefficients.at(0);
    const double mc_se = std::sqrt((long_t.rmse * long_t.rmse - long_t.bias * long_t.bias) / long_t.count);
    CHECK(std::abs(long_t.bias) <= 3 * mc_se);
    CHECK(std::abs(long_t.bias) < std::abs(short_t.bias) / 4);
    CHECK(long_t.rmse < short_t.rmse / 3);
    CHECK(rep.cells[1].by_q[0].selection[0].frequency[1] == 1.0);
}
