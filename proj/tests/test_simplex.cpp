#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "rdc/simplex.hpp"
#include "support/lp_oracle.hpp"

using rdc::LpProblem;
using rdc::LpStatus;

namespace {

LpProblem one_var() { return LpProblem(1); }

void add_nonneg(LpProblem& lp) {
    for (std::size_t j = 0; j < lp.n_vars; ++j) {
        std::vector<double> row(lp.n_vars, 0.0);
        row[j] = -1.0;
        lp.add_ineq(row, 0.0);
    }
}

}  // namespace

TEST(Simplex, BoundedMaximum) {
    LpProblem lp = one_var();
    lp.objective = {1.0};
    lp.add_ineq(std::vector<double>{1.0}, 3.0);
    lp.add_ineq(std::vector<double>{-1.0}, 0.0);
    auto out = rdc::solve(lp);
    ASSERT_EQ(out.status, LpStatus::optimal);
    EXPECT_NEAR(out.value, 3.0, 1e-12);
    ASSERT_EQ(out.point.size(), 1u);
    EXPECT_NEAR(out.point[0], 3.0, 1e-12);
}

TEST(Simplex, NoConstraintsIsUnbounded) {
    LpProblem lp = one_var();
    lp.objective = {1.0};
    EXPECT_EQ(rdc::solve(lp).status, LpStatus::unbounded);
}

TEST(Simplex, ZeroObjectiveWithoutConstraints) {
    LpProblem lp(3);
    auto out = rdc::solve(lp);
    ASSERT_EQ(out.status, LpStatus::optimal);
    EXPECT_EQ(out.value, 0.0);
}

TEST(Simplex, ContradictoryBoundsAreInfeasible) {
    LpProblem lp = one_var();
    lp.objective = {1.0};
    lp.add_ineq(std::vector<double>{1.0}, 0.0);
    lp.add_ineq(std::vector<double>{-1.0}, -1.0);
    EXPECT_EQ(rdc::solve(lp).status, LpStatus::infeasible);
}

TEST(Simplex, UnconstrainedVariableWithInfeasibleRest) {
    // x1 appears nowhere but the rest is empty: infeasibility must win over unboundedness.
    LpProblem lp(2);
    lp.objective = {0.0, 1.0};
    lp.add_ineq(std::vector<double>{1.0, 0.0}, -1.0);
    lp.add_ineq(std::vector<double>{-1.0, 0.0}, -1.0);
    EXPECT_EQ(rdc::solve(lp).status, LpStatus::infeasible);
    lp.ineq_rhs[1] = 2.0;
    EXPECT_EQ(rdc::solve(lp).status, LpStatus::unbounded);
}

TEST(Simplex, EqualitiesAndConstant) {
    LpProblem lp(3);
    lp.objective = {1.0, 2.0, -1.0};
    lp.objective_constant = -4.0;
    lp.add_eq(std::vector<double>{1.0, 1.0, 1.0}, 6.0);
    lp.add_eq(std::vector<double>{1.0, -1.0, 0.0}, 0.0);
    lp.add_ineq(std::vector<double>{0.0, 0.0, -1.0}, -1.0);
    lp.add_ineq(std::vector<double>{1.0, 0.0, 0.0}, 10.0);
    // x0 = x1, x2 = 6 - 2 x0 >= 1 → x0 <= 2.5; objective 3 x0 - (6 - 2 x0) - 4 = 5 x0 - 10.
    auto out = rdc::solve(lp);
    ASSERT_EQ(out.status, LpStatus::optimal);
    EXPECT_NEAR(out.value, 2.5, 1e-9);
    EXPECT_LE(rdc::lp_relative_violation(lp, out.point), 1e-9);
}

TEST(Simplex, RedundantAndInconsistentEqualities) {
    LpProblem lp(2);
    lp.objective = {1.0, 0.0};
    lp.add_eq(std::vector<double>{1.0, 1.0}, 2.0);
    lp.add_eq(std::vector<double>{2.0, 2.0}, 4.0);
    lp.add_ineq(std::vector<double>{1.0, 0.0}, 5.0);
    auto out = rdc::solve(lp);
    ASSERT_EQ(out.status, LpStatus::optimal);
    EXPECT_NEAR(out.value, 5.0, 1e-9);
    lp.eq_rhs[1] = 5.0;
    EXPECT_EQ(rdc::solve(lp).status, LpStatus::infeasible);
}

TEST(Simplex, BealeDegenerateExampleTerminates) {
    LpProblem lp(4);
    lp.objective = {0.75, -20.0, 0.5, -6.0};
    lp.add_ineq(std::vector<double>{0.25, -8.0, -1.0, 9.0}, 0.0);
    lp.add_ineq(std::vector<double>{0.5, -12.0, -0.5, 3.0}, 0.0);
    lp.add_ineq(std::vector<double>{0.0, 0.0, 1.0, 0.0}, 1.0);
    add_nonneg(lp);
    auto out = rdc::solve(lp);
    ASSERT_EQ(out.status, LpStatus::optimal);
    EXPECT_NEAR(out.value, 1.25, 1e-9);
    auto ref = oracle::solve(lp);
    ASSERT_EQ(ref.status, LpStatus::optimal);
    EXPECT_NEAR(out.value, ref.value, 1e-9);
}

TEST(Simplex, BlandOnlyMatchesDantzig) {
    std::mt19937_64 gen(7);
    for (int k = 0; k < 60; ++k) {
        LpProblem lp = oracle::random_lp(gen);
        rdc::LpOutcome a, b;
        try {
            a = rdc::detail::solve_once(lp, {}, false, true);
            b = rdc::detail::solve_once(lp, {}, true, true);
        } catch (const rdc::NumericalFailure&) {
            continue;
        }
        ASSERT_EQ(a.status, b.status) << "instance " << k;
        if (a.status == LpStatus::optimal) {
            EXPECT_NEAR(a.value, b.value, 1e-7 * (1 + std::abs(a.value)));
        }
    }
}

TEST(Simplex, RandomAgainstEnumerationOracle) {
    std::mt19937_64 gen(20240601);
    int compared = 0, seen[3] = {0, 0, 0};
    for (int k = 0; k < 300; ++k) {
        LpProblem lp = oracle::random_lp(gen);
        auto ref = oracle::solve(lp);
        auto out = rdc::solve(lp);
        if (ref.touches_box) continue;
        ++compared;
        ++seen[static_cast<int>(ref.status)];
        ASSERT_EQ(out.status, ref.status) << "instance " << k;
        if (ref.status == LpStatus::optimal) {
            EXPECT_NEAR(out.value, ref.value, 1e-7 * (1 + std::abs(ref.value))) << "instance " << k;
            EXPECT_LE(rdc::lp_relative_violation(lp, out.point), 1e-9);
        }
    }
    EXPECT_GE(compared, 200);
    for (int s : seen) EXPECT_GT(s, 0);
}

TEST(Simplex, PresolveDoesNotChangeAnswers) {
    std::mt19937_64 gen(99);
    for (int k = 0; k < 150; ++k) {
        LpProblem lp = oracle::random_lp(gen, 6, 12);
        rdc::SolverOptions with, without;
        without.presolve = false;
        auto a = rdc::solve(lp, with);
        auto b = rdc::solve(lp, without);
        ASSERT_EQ(a.status, b.status) << "instance " << k;
        if (a.status == LpStatus::optimal) {
            EXPECT_NEAR(a.value, b.value, 1e-7 * (1 + std::abs(a.value)));
        }
    }
}

TEST(Simplex, Deterministic) {
    std::mt19937_64 gen(5);
    for (int k = 0; k < 40; ++k) {
        LpProblem lp = oracle::random_lp(gen);
        auto a = rdc::solve(lp);
        auto b = rdc::solve(lp);
        ASSERT_EQ(a.status, b.status);
        EXPECT_EQ(a.value, b.value);
        EXPECT_EQ(a.point, b.point);
        EXPECT_EQ(a.iterations, b.iterations);
    }
}

TEST(Simplex, LargerSparseProblemIsFeasibleAndOptimal) {
    // Chain x_{k+1} = x_k + u_k with |u_k| <= 1, x_0 = 0: max x_N equals N.
    const std::size_t N = 60;
    LpProblem lp(2 * N + 1);
    std::vector<double> row(lp.n_vars);
    auto x = [](std::size_t k) { return k; };
    auto u = [&](std::size_t k) { return N + 1 + k; };
    std::fill(row.begin(), row.end(), 0.0);
    row[x(0)] = 1.0;
    lp.add_eq(row, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
        std::fill(row.begin(), row.end(), 0.0);
        row[x(k + 1)] = 1.0;
        row[x(k)] = -1.0;
        row[u(k)] = -1.0;
        lp.add_eq(row, 0.0);
        std::fill(row.begin(), row.end(), 0.0);
        row[u(k)] = 1.0;
        lp.add_ineq(row, 1.0);
        row[u(k)] = -1.0;
        lp.add_ineq(row, 1.0);
    }
    lp.objective[x(N)] = 1.0;
    auto out = rdc::solve(lp);
    ASSERT_EQ(out.status, LpStatus::optimal);
    EXPECT_NEAR(out.value, static_cast<double>(N), 1e-8);
}

TEST(Simplex, RejectsInconsistentDimensions) {
    LpProblem lp(2);
    lp.objective = {1.0};
    EXPECT_THROW(rdc::solve(lp), rdc::DimensionError);
}

TEST(Simplex, LpTextListing) {
    LpProblem lp(2);
    lp.var_names = {"a", "b"};
    lp.objective = {1.0, -2.0};
    lp.objective_constant = 0.5;
    lp.add_eq(std::vector<double>{1.0, 1.0}, 1.0);
    lp.add_ineq(std::vector<double>{0.0, -3.0}, 4.0);
    std::ostringstream os;
    rdc::write_lp_text(os, lp, "demo");
    const std::string s = os.str();
    EXPECT_NE(s.find("\\ demo"), std::string::npos);
    EXPECT_NE(s.find("obj: 1 a - 2 b"), std::string::npos);
    EXPECT_NE(s.find("e0: 1 a + 1 b = 1"), std::string::npos);
    EXPECT_NE(s.find("c0: -3 b <= 4"), std::string::npos);
    EXPECT_NE(s.find(" a free"), std::string::npos);
    EXPECT_NE(s.find("End"), std::string::npos);
}
