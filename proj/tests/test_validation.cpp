#include <doctest.h>

#include <sstream>
#include <string>

#include "fbq/errors.hpp"
#include "fbq/validation.hpp"

using namespace fbq;
using namespace fbq::validation;

namespace {

Options quick(double effort = 0.1) {
    Options o;
    o.effort = effort;
    return o;
}

void check_well_formed(const std::vector<Verdict>& vs) {
    REQUIRE_FALSE(vs.empty());
    for (const auto& v : vs) {
        CAPTURE(v.experiment);
        CHECK_FALSE(v.experiment.empty());
        CHECK(v.passed() == (v.outcome == Outcome::Pass || v.outcome == Outcome::Informational));
        if (std::isfinite(v.ci_lo) && std::isfinite(v.ci_hi)) CHECK(v.ci_lo <= v.ci_hi);
    }
}

}  // namespace

TEST_CASE("suite registry") {
    const auto& s = suites();
    for (const char* name : {"mean-formulas", "stochastic-order", "max-queue", "tail-equivalence",
                             "ht-exponential-limit", "truncation-cohorts", "overload", "heavy-traffic", "slowdown",
                             "pgf", "decay-rate", "analytic-bounds"})
        CHECK(s.count(name) == 1);
    CHECK_THROWS_AS(run_suite("no-such-suite", quick()), ConfigError);
}

TEST_CASE("analytic suites pass") {
    for (const char* name : {"pgf", "decay-rate", "slowdown"}) {
        CAPTURE(name);
        const auto vs = run_suite(name, quick());
        check_well_formed(vs);
        for (const auto& v : vs) {
            CAPTURE(v.experiment);
            CHECK(v.passed());
        }
    }
}

TEST_CASE("overload suite at reduced effort") {
    const auto vs = check_overload(quick(0.2));
    check_well_formed(vs);
    CHECK(all_passed(vs));
}

TEST_CASE("simulation suites at reduced effort are well formed and reproducible") {
    const auto a = check_truncation_and_cohorts(quick(0.05));
    check_well_formed(a);
    const auto b = check_truncation_and_cohorts(quick(0.05));
    CHECK(to_json(a).dump() == to_json(b).dump());
    // The coupled truncation is exact for any budget.
    for (const auto& v : a)
        if (v.experiment.rfind("truncation/", 0) == 0) CHECK(v.outcome == Outcome::Pass);

    Options other = quick(0.05);
    other.seed = 1;
    CHECK(to_json(check_truncation_and_cohorts(other)).dump() != to_json(a).dump());
}

TEST_CASE("serialization") {
    Verdict v;
    v.experiment = "demo/with, comma";
    v.analytic = 1.0;
    v.empirical = 1.01;
    v.ci_lo = 0.99;
    v.ci_hi = 1.03;
    v.statistic = 0.5;
    v.tolerance = 2.576;
    v.outcome = Outcome::Pass;
    v.seeds = {7};
    const std::vector<Verdict> vs = {v};

    const auto j = to_json(vs);
    REQUIRE(j.is_array());
    CHECK(j[0]["experiment"] == "demo/with, comma");
    CHECK(j[0]["outcome"] == "pass");
    CHECK(j[0]["pass"] == true);

    std::istringstream csv(to_csv(vs));
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "experiment,value,ci_lo,ci_hi,analytic,pass");
    CHECK(row.rfind("\"demo/with, comma\",", 0) == 0);
    CHECK(row.substr(row.size() - 4) == "true");

    CHECK(to_string(Outcome::Inconclusive) == "inconclusive");
    Verdict bad = v;
    bad.outcome = Outcome::Inconclusive;
    CHECK_FALSE(bad.passed());
    CHECK_FALSE(all_passed({v, bad}));
}
