#include <gtest/gtest.h>

#include <sstream>

#include "rdc/platoon.hpp"

using namespace rdc;

namespace {

// Vehicle r (1-based) as a component signal: d = [p_{r-1}, v_{r-1}, u_r], y = [p_r, v_r].
void physical_signals(const Trajectory& tr, int r, Signal& d, Signal& y) {
    d.clear();
    y.clear();
    for (std::size_t k = 0; k < tr.steps; ++k) {
        d.push_back({tr.p[r - 2][k], tr.v[r - 2][k], tr.u[r - 1][k]});
        y.push_back({tr.p[r - 1][k], tr.v[r - 1][k]});
    }
}

void controller_signals(const Trajectory& tr, int r, Signal& d, Signal& y) {
    d.clear();
    y.clear();
    for (std::size_t k = 0; k < tr.steps; ++k) {
        d.push_back({tr.p[r - 2][k], tr.v[r - 2][k], tr.p[r - 1][k], tr.v[r - 1][k]});
        y.push_back({tr.u[r - 1][k]});
    }
}

void system_signals(const Trajectory& tr, Signal& d, Signal& y) {
    d.clear();
    y.clear();
    for (std::size_t k = 0; k < tr.steps; ++k) {
        d.push_back({tr.p[0][k], tr.v[0][k]});
        std::vector<double> row;
        for (int r = 1; r < tr.M; ++r) {
            row.push_back(tr.p[r][k]);
            row.push_back(tr.v[r][k]);
        }
        y.push_back(row);
    }
}

Trajectory blank(int M, std::size_t steps) {
    Trajectory tr;
    tr.M = M;
    tr.steps = steps;
    for (auto* x : {&tr.p, &tr.v, &tr.u, &tr.omega}) x->assign(M, std::vector<double>(steps, 0.0));
    return tr;
}

}  // namespace

TEST(Platoon, UnitConversion) {
    EXPECT_DOUBLE_EQ(kmh_to_ms(36.0), 10.0);
    EXPECT_DOUBLE_EQ(kmh_to_ms(0.0), 0.0);
    PlatoonParams P;
    EXPECT_NEAR(P.v_max_leader, 110.0 / 3.6, 1e-12);
    EXPECT_NEAR(P.v_max_follower, 100.0 / 3.6, 1e-12);
    auto Q = PlatoonParams::from_kmh(4, 72.0, 54.0);
    EXPECT_EQ(Q.M, 4);
    EXPECT_DOUBLE_EQ(Q.v_max_leader, 20.0);
    EXPECT_DOUBLE_EQ(Q.v_max_follower, 15.0);
}

TEST(Platoon, ParameterValidation) {
    PlatoonParams P;
    P.M = 1;
    EXPECT_THROW(P.validate(), std::invalid_argument);
    EXPECT_THROW(build_platoon(P), std::invalid_argument);
    P = PlatoonParams{};
    P.w_acc = 0.0;
    EXPECT_THROW(P.validate(), std::invalid_argument);
    P = PlatoonParams{};
    P.v_max_follower = 0.5;
    EXPECT_THROW(P.validate(), std::invalid_argument);
}

TEST(Platoon, DefaultLeaderProfile) {
    auto prof = default_leader_profile();
    ASSERT_EQ(prof.size(), 12u);
    double total = 0.0;
    for (const auto& s : prof) total += s.duration;
    EXPECT_DOUBLE_EQ(total, 300.0);
    EXPECT_NEAR(prof.front().target_speed, 95.0 / 3.6, 1e-12);
    EXPECT_NEAR(prof[1].target_speed, 10.0 / 3.6, 1e-12);
    EXPECT_NEAR(prof.back().target_speed, 105.0 / 3.6, 1e-12);
}

TEST(Platoon, EquilibriumRideKeepsHeadway) {
    // Leader cruising at the follower's speed with a generous gap.
    PlatoonParams P;
    const double v = kmh_to_ms(80.0);
    LeaderProfile flat{{1000.0, v, 1.0}};
    auto tr = simulate(P, 200, 3, flat, v, 3.0 * P.h * v);
    EXPECT_EQ(tr.infeasible_count, 0u);
    EXPECT_TRUE(check_trajectory_guarantees(tr, P).ok);
    for (std::size_t k = 0; k < tr.steps; ++k) EXPECT_DOUBLE_EQ(tr.v[0][k], v);
}

TEST(Platoon, ConstantConvoyOfFive) {
    PlatoonParams P;
    P.M = 5;
    const double v = kmh_to_ms(60.0);
    LeaderProfile flat{{1000.0, v, 1.0}};
    auto tr = simulate(P, 300, 9, flat, v, 2.0 * P.h * v);
    EXPECT_EQ(tr.infeasible_count, 0u);
    EXPECT_TRUE(check_trajectory_guarantees(tr, P).ok);
}

TEST(Platoon, HandBuiltHeadwayViolationIsLocated) {
    PlatoonParams P;
    auto tr = blank(2, 10);
    for (std::size_t k = 0; k < 10; ++k) {
        tr.p[0][k] = 100.0 + 10.0 * static_cast<double>(k);
        tr.v[0][k] = 10.0;
        tr.p[1][k] = 10.0 * static_cast<double>(k);
        tr.v[1][k] = 10.0;
    }
    EXPECT_TRUE(check_trajectory_guarantees(tr, P).ok);
    tr.p[1][7] = tr.p[0][7] - P.h * tr.v[1][7] + 0.5;
    auto chk = check_trajectory_guarantees(tr, P);
    ASSERT_FALSE(chk.ok);
    ASSERT_TRUE(chk.first.has_value());
    EXPECT_EQ(chk.first->step, 7u);
    EXPECT_EQ(chk.first->vehicle, 2);
    EXPECT_EQ(chk.first->row, "headway");
    EXPECT_NEAR(chk.first->residual, 0.5, 1e-9);

    auto tr2 = blank(3, 4);
    for (std::size_t k = 0; k < 4; ++k) {
        tr2.p[0][k] = 1000.0;
        tr2.p[1][k] = 500.0;
    }
    tr2.v[2][2] = -0.25;
    chk = check_trajectory_guarantees(tr2, P);
    ASSERT_FALSE(chk.ok);
    EXPECT_EQ(chk.first->step, 2u);
    EXPECT_EQ(chk.first->vehicle, 3);
    EXPECT_EQ(chk.first->row, "speed_min");
}

TEST(Platoon, FiftySeededRunsKeepGuarantees) {
    PlatoonParams P;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto tr = simulate(P, 300, seed);
        EXPECT_EQ(tr.infeasible_count, 0u) << "seed " << seed;
        auto chk = check_trajectory_guarantees(tr, P);
        EXPECT_TRUE(chk.ok) << "seed " << seed;
    }
}

TEST(Platoon, KinematicsAreExact) {
    PlatoonParams P;
    P.M = 3;
    auto tr = simulate(P, 120, 5);
    for (int r = 0; r < tr.M; ++r) {
        for (std::size_t k = 0; k + 1 < tr.steps; ++k) {
            EXPECT_EQ(tr.p[r][k + 1], tr.p[r][k] + P.dt * tr.v[r][k]);
            if (r > 0) {
                EXPECT_EQ(tr.v[r][k + 1], tr.v[r][k] + P.dt * (tr.u[r][k] + tr.omega[r][k]));
            }
        }
    }
}

TEST(Platoon, NoiseStaysInBoundsAndIsSeeded) {
    PlatoonParams P;
    auto a = simulate(P, 300, 17), b = simulate(P, 300, 17), c = simulate(P, 300, 18);
    EXPECT_EQ(a.omega, b.omega);
    EXPECT_EQ(a.p, b.p);
    EXPECT_NE(a.omega, c.omega);
    EXPECT_EQ(a.rng, "mt19937_64");
    for (double w : a.omega[1]) {
        EXPECT_GE(w, -P.w_acc);
        EXPECT_LT(w, P.w_acc);
    }
    for (double w : a.omega[0]) EXPECT_EQ(w, 0.0);
}

TEST(Platoon, TrajectoriesSatisfyComponentAndSystemContracts) {
    PlatoonParams P;
    P.M = 3;
    for (std::uint64_t seed : {2u, 40u}) {
        auto tr = simulate(P, 300, seed);
        Signal d, y;
        for (int r = 2; r <= P.M; ++r) {
            auto phy = platoon_physical_contract(P, "phy");
            physical_signals(tr, r, d, y);
            EXPECT_TRUE(check_assumption_prefix(phy, d, y, 1e-9)) << "phy assumptions, vehicle " << r;
            EXPECT_TRUE(check_guarantee_prefix(phy, d, y, 1e-9)) << "phy guarantees, vehicle " << r;
            auto ctr = platoon_controller_contract(P, "ctr");
            controller_signals(tr, r, d, y);
            EXPECT_TRUE(check_assumption_prefix(ctr, d, y, 1e-9)) << "ctr assumptions, vehicle " << r;
            EXPECT_TRUE(check_guarantee_prefix(ctr, d, y, 1e-9)) << "ctr guarantees, vehicle " << r;
        }
        system_signals(tr, d, y);
        auto sys = platoon_system_contract(P, P.h);
        EXPECT_TRUE(check_assumption_prefix(sys, d, y, 1e-9));
        EXPECT_TRUE(check_guarantee_prefix(sys, d, y, 1e-9));
        // A longer headway demand is eventually violated by the same run.
        EXPECT_FALSE(check_guarantee_prefix(platoon_system_contract(P, 3.0), d, y, 1e-9));
    }
}

TEST(Platoon, ControllerRowsImplyPhysicalInputBounds) {
    // Whenever the controller output meets its guarantee at k, the physical assumption
    // on u(k) evaluated at k+1 is met.
    PlatoonParams P;
    auto tr = simulate(P, 300, 23);
    auto phy = platoon_physical_contract(P, "phy");
    auto ctr = platoon_controller_contract(P, "ctr");
    Signal dp, yp, dc, yc;
    physical_signals(tr, 2, dp, yp);
    controller_signals(tr, 2, dc, yc);
    for (std::size_t k = 0; k + 1 < tr.steps; ++k) {
        SignalWindow cd{4, {dc[k]}}, cy{1, {yc[k]}};
        ExtReal g = eval_gamma(ctr, cd, cy);
        ASSERT_TRUE(g.le(1e-9));
        SignalWindow pd{3, {dp[k], dp[k + 1]}}, py{2, {yp[k]}};
        EXPECT_TRUE(eval_alpha(phy, pd, py).le(1e-9)) << "step " << k;
    }
}

TEST(Platoon, InfeasibleControlIsFlagged) {
    // Follower starts too close and too fast: no admissible input exists at step 0.
    PlatoonParams P;
    LeaderProfile flat{{100.0, kmh_to_ms(20.0), 1.0}};
    auto tr = simulate(P, 20, 1, flat, kmh_to_ms(99.0), 5.0);
    EXPECT_GT(tr.infeasible_count, 0u);
    ASSERT_TRUE(tr.first_infeasible.has_value());
    EXPECT_EQ(tr.first_infeasible->first, 0u);
    EXPECT_EQ(tr.first_infeasible->second, 2);
}

TEST(Platoon, SimulationInputValidation) {
    PlatoonParams P;
    EXPECT_THROW(simulate(P, 0, 1), std::invalid_argument);
    EXPECT_THROW(simulate(P, 10, 1, LeaderProfile{}), std::invalid_argument);
    EXPECT_THROW(simulate(P, 10, 1, LeaderProfile{{10.0, P.v_max_leader + 1.0, 1.0}}), std::invalid_argument);
}

TEST(Platoon, CsvHasOneRowPerVehicleStep) {
    PlatoonParams P;
    P.M = 3;
    auto tr = simulate(P, 12, 1);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "step,vehicle,p,v,u,omega");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 36);
}

TEST(Platoon, NetworkShape) {
    PlatoonParams P;
    P.M = 4;
    auto p = build_platoon(P);
    const Network& net = p.network;
    ASSERT_EQ(net.size(), 6u);
    EXPECT_EQ(net.name(0), "phy_2");
    EXPECT_EQ(net.name(1), "ctr_2");
    EXPECT_EQ(net.name(5), "ctr_4");
    EXPECT_EQ(net.n_d_ext(), 2u);
    EXPECT_EQ(net.n_y_ext(), 6u);
    EXPECT_EQ(net.causality(1, 0), Causality::strict);
    EXPECT_EQ(net.causality(0, 1), Causality::nonstrict);
    EXPECT_EQ(net.causality(0, 2), Causality::nonstrict);
    EXPECT_EQ(p.c_tot.label(), "C_tot");
}
