#ifndef RDC_PLATOON_HPP
#define RDC_PLATOON_HPP

// Vehicle platoon case study: contracts for follower physics and controllers, the
// leader/follower network, and a closed-loop simulator with a saturating controller.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdc/contracts.hpp"
#include "rdc/network.hpp"
#include "rdc/verification.hpp"

namespace rdc {

inline constexpr double kmh_to_ms(double kmh) { return kmh * 1000.0 / 3600.0; }

struct PlatoonParams {
    int M = 2;
    double dt = 1.0;
    double h = 2.0;
    double v_max_leader = kmh_to_ms(110.0);
    double v_max_follower = kmh_to_ms(100.0);
    double w_acc = 0.3;

    static PlatoonParams from_kmh(int M, double v_leader_kmh, double v_follower_kmh) {
        PlatoonParams p;
        p.M = M;
        p.v_max_leader = kmh_to_ms(v_leader_kmh);
        p.v_max_follower = kmh_to_ms(v_follower_kmh);
        return p;
    }

    void validate() const {
        if (M < 2) throw std::invalid_argument("platoon needs M >= 2 vehicles");
        if (!(dt > 0 && h > 0 && v_max_leader > 0 && v_max_follower > 0 && w_acc > 0)) {
            throw std::invalid_argument("platoon parameters must be positive");
        }
        if (!(v_max_follower * dt > 2.0 * w_acc * dt)) {
            throw std::invalid_argument("v_max_follower must exceed 2 * w_acc so the control interval is nonempty");
        }
    }
};

namespace platoon_detail {

// Kinematics equality p(k) - p(k-1) - dt v(k-1) = 0 as two rows; `pos`, `vel` are coordinate accessors.
template <typename Pos, typename Vel>
void kinematics_pair(BlockBuilder& b, double dt, Pos pos, Vel vel) {
    for (double s : {1.0, -1.0}) {
        b.row().rhs(0.0);
        pos(b, 0, s);
        pos(b, 1, -s);
        vel(b, 1, -s * dt);
    }
}

}  // namespace platoon_detail

/// Follower physics: d = [p_prev, v_prev, u], y = [p, v].
inline LtiRdContract platoon_physical_contract(const PlatoonParams& P, const std::string& label) {
    const double dt = P.dt, h = P.h, w = P.w_acc;
    BlockBuilder a(BlockKind::assumption, 1, 3, 2);
    platoon_detail::kinematics_pair(
        a, dt, [](BlockBuilder& b, int lag, double c) { b.d(lag, 0, c); },
        [](BlockBuilder& b, int lag, double c) { b.d(lag, 1, c); });
    // Bounds on the previous input u(k-1), from the state at k-1.
    a.row().d(1, 2, 1.0).d(1, 0, -1.0 / (h * dt)).d(1, 1, -1.0 / h).y(1, 0, 1.0 / (h * dt)).y(1, 1, 1.0 / dt + 1.0 / h).rhs(-w);
    a.row().d(1, 2, -1.0).y(1, 1, -1.0 / dt).rhs(-w);
    a.row().d(1, 2, 1.0).y(1, 1, 1.0 / dt).rhs(P.v_max_follower / dt - w);

    BlockBuilder g(BlockKind::guarantee, 1, 3, 2);
    g.row().d(0, 0, -1.0).y(0, 0, 1.0).y(0, 1, h).rhs(0.0);
    g.row().y(0, 1, 1.0).rhs(P.v_max_follower);
    g.row().y(0, 1, -1.0).rhs(0.0);
    platoon_detail::kinematics_pair(
        g, dt, [](BlockBuilder& b, int lag, double c) { b.y(lag, 0, c); },
        [](BlockBuilder& b, int lag, double c) { b.y(lag, 1, c); });
    return LtiRdContract(3, 2, {a.build()}, {g.build()}, label);
}

/// Follower controller: d = [p_prev, v_prev, p, v], y = [u].
inline LtiRdContract platoon_controller_contract(const PlatoonParams& P, const std::string& label) {
    const double dt = P.dt, h = P.h, w = P.w_acc;
    BlockBuilder a(BlockKind::assumption, 1, 4, 1);
    platoon_detail::kinematics_pair(
        a, dt, [](BlockBuilder& b, int lag, double c) { b.d(lag, 0, c); },
        [](BlockBuilder& b, int lag, double c) { b.d(lag, 1, c); });
    platoon_detail::kinematics_pair(
        a, dt, [](BlockBuilder& b, int lag, double c) { b.d(lag, 2, c); },
        [](BlockBuilder& b, int lag, double c) { b.d(lag, 3, c); });
    a.row().d(0, 1, 1.0).rhs(P.v_max_leader);
    a.row().d(0, 1, -1.0).rhs(0.0);
    a.row().d(0, 3, 1.0).rhs(P.v_max_follower);
    a.row().d(0, 3, -1.0).rhs(0.0);

    BlockBuilder g(BlockKind::guarantee, 0, 4, 1);
    g.row().y(0, 0, 1.0).d(0, 0, -1.0 / (h * dt)).d(0, 1, -1.0 / h).d(0, 2, 1.0 / (h * dt)).d(0, 3, 1.0 / dt + 1.0 / h).rhs(-w);
    g.row().y(0, 0, -1.0).d(0, 3, -1.0 / dt).rhs(-w);
    g.row().y(0, 0, 1.0).d(0, 3, 1.0 / dt).rhs(P.v_max_follower / dt - w);
    return LtiRdContract(4, 1, {a.build()}, {g.build()}, label);
}

/// System contract: d = [p_1, v_1] (leader), y = [p_2, v_2, ..., p_M, v_M].
inline LtiRdContract platoon_system_contract(const PlatoonParams& P, double h_tot) {
    const std::size_t ny = 2 * static_cast<std::size_t>(P.M - 1);
    BlockBuilder a(BlockKind::assumption, 1, 2, ny);
    platoon_detail::kinematics_pair(
        a, P.dt, [](BlockBuilder& b, int lag, double c) { b.d(lag, 0, c); },
        [](BlockBuilder& b, int lag, double c) { b.d(lag, 1, c); });
    a.row().d(0, 1, 1.0).rhs(P.v_max_leader);
    a.row().d(0, 1, -1.0).rhs(0.0);

    BlockBuilder g(BlockKind::guarantee, 1, 2, ny);
    for (int r = 2; r <= P.M; ++r) {
        std::size_t pr = 2 * static_cast<std::size_t>(r - 2);
        g.row().y(0, pr, 1.0).y(0, pr + 1, h_tot).rhs(0.0);
        if (r == 2) {
            g.d(0, 0, -1.0);
        } else {
            g.y(0, pr - 2, -1.0);
        }
        g.row().y(0, pr + 1, 1.0).rhs(P.v_max_follower);
        g.row().y(0, pr + 1, -1.0).rhs(0.0);
    }
    return LtiRdContract(2, ny, {a.build()}, {g.build()}, "C_tot");
}

inline std::string platoon_node_id(int r, int part) {
    return (part == 1 ? "phy_" : "ctr_") + std::to_string(r);
}

/// Network for followers r = 2..M: nodes phy_r, ctr_r in that order; external input [p_1, v_1].
/// `h_tot` overrides the headway of the system contract only.
inline VerificationProblem build_platoon(const PlatoonParams& P, std::optional<double> h_tot = std::nullopt) {
    P.validate();
    std::vector<NetworkNode> nodes;
    std::vector<std::vector<SourceRef>> inputs;
    std::vector<SourceRef> outputs;
    for (int r = 2; r <= P.M; ++r) {
        NodeId phy = nodes.size();
        NodeId ctr = phy + 1;
        nodes.push_back({platoon_node_id(r, 1), platoon_physical_contract(P, "C_phy_" + std::to_string(r))});
        nodes.push_back({platoon_node_id(r, 2), platoon_controller_contract(P, "C_ctr_" + std::to_string(r))});
        SourceRef p_prev{std::nullopt, 0}, v_prev{std::nullopt, 1};
        if (r > 2) {
            p_prev = {phy - 2, 0};
            v_prev = {phy - 2, 1};
        }
        inputs.push_back({p_prev, v_prev, {ctr, 0}});
        inputs.push_back({p_prev, v_prev, {phy, 0}, {phy, 1}});
        outputs.push_back({phy, 0});
        outputs.push_back({phy, 1});
    }
    VerificationProblem prob{Network::from_sources(std::move(nodes), 2, inputs, outputs),
                             platoon_system_contract(P, h_tot.value_or(P.h)),
                             {}};
    return prob;
}

/// Leader speed program: hold/approach `target_speed` for `duration` seconds, changing by at most max_slew per second.
struct LeaderSegment {
    double duration = 0.0;
    double target_speed = 0.0;
    double max_slew = 0.0;
};

using LeaderProfile = std::vector<LeaderSegment>;

/// Cruise at 95 km/h, then five dips to 10 km/h and back, then a slow climb to 105 km/h.
inline LeaderProfile default_leader_profile() {
    LeaderProfile prof{{100.0, kmh_to_ms(95.0), 3.0}};
    for (int i = 0; i < 5; ++i) {
        prof.push_back({10.0, kmh_to_ms(10.0), 3.0});
        prof.push_back({10.0, kmh_to_ms(95.0), 3.0});
    }
    prof.push_back({100.0, kmh_to_ms(105.0), 0.05});
    return prof;
}

struct Trajectory {
    int M = 0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    std::string rng = "mt19937_64";
    // Indexed [vehicle - 1][step]; the leader (vehicle 1) has zero u and omega.
    std::vector<std::vector<double>> p, v, u, omega;
    std::size_t infeasible_count = 0;
    std::optional<std::pair<std::size_t, int>> first_infeasible;  // (step, vehicle)
};

/// Closed-loop run: each follower applies u = max(lower, min(upper_headway, upper_speed)).
inline Trajectory simulate(const PlatoonParams& P, std::size_t steps, std::uint64_t seed,
                           const LeaderProfile& profile = default_leader_profile(),
                           double follower_speed = kmh_to_ms(98.0), double initial_gap = 80.0) {
    P.validate();
    if (steps < 1) throw std::invalid_argument("simulate: steps must be at least 1");
    if (profile.empty()) throw std::invalid_argument("simulate: empty leader profile");
    for (const auto& seg : profile) {
        if (seg.duration < 0 || seg.max_slew < 0 || seg.target_speed < 0 || seg.target_speed > P.v_max_leader) {
            throw std::invalid_argument("simulate: leader segment outside [0, v_max_leader] or negative");
        }
    }
    const std::size_t n = static_cast<std::size_t>(P.M);
    Trajectory tr;
    tr.M = P.M;
    tr.steps = steps;
    tr.seed = seed;
    auto alloc = [&](auto& x) { x.assign(n, std::vector<double>(steps, 0.0)); };
    alloc(tr.p);
    alloc(tr.v);
    alloc(tr.u);
    alloc(tr.omega);

    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> noise(-P.w_acc, P.w_acc);

    // Leader speed target at time t (seconds), by segment.
    auto target_at = [&](double t) {
        double acc = 0.0;
        for (const auto& seg : profile) {
            acc += seg.duration;
            if (t < acc) return seg;
        }
        return profile.back();
    };

    tr.v[0][0] = profile.front().target_speed;
    for (std::size_t r = 1; r < n; ++r) {
        tr.p[r][0] = tr.p[r - 1][0] - initial_gap;
        tr.v[r][0] = follower_speed;
    }
    for (std::size_t k = 0; k < steps; ++k) {
        // Control and noise at step k, from the state at step k.
        for (std::size_t r = 1; r < n; ++r) {
            double p = tr.p[r][k], v = tr.v[r][k], pp = tr.p[r - 1][k], vp = tr.v[r - 1][k];
            double lower = -v / P.dt + P.w_acc;
            double up_headway = (pp - p - P.h * v) / (P.h * P.dt) + (vp - v) / P.h - P.w_acc;
            double up_speed = (P.v_max_follower - v) / P.dt - P.w_acc;
            double upper = std::min(up_headway, up_speed);
            if (upper < lower) {
                ++tr.infeasible_count;
                if (!tr.first_infeasible) tr.first_infeasible = std::make_pair(k, static_cast<int>(r + 1));
            }
            tr.u[r][k] = std::max(lower, upper);
            tr.omega[r][k] = noise(gen);
        }
        if (k + 1 == steps) break;
        const LeaderSegment seg = target_at(static_cast<double>(k) * P.dt);
        double dv = std::clamp(seg.target_speed - tr.v[0][k], -seg.max_slew * P.dt, seg.max_slew * P.dt);
        tr.v[0][k + 1] = std::clamp(tr.v[0][k] + dv, 0.0, P.v_max_leader);
        tr.p[0][k + 1] = tr.p[0][k] + P.dt * tr.v[0][k];
        for (std::size_t r = 1; r < n; ++r) {
            tr.v[r][k + 1] = tr.v[r][k] + P.dt * (tr.u[r][k] + tr.omega[r][k]);
            tr.p[r][k + 1] = tr.p[r][k] + P.dt * tr.v[r][k];
        }
    }
    return tr;
}

struct GuaranteeViolation {
    std::size_t step = 0;
    int vehicle = 0;
    std::string row;  // "headway", "speed_max" or "speed_min"
    double residual = 0.0;
};

struct GuaranteeCheck {
    bool ok = true;
    std::optional<GuaranteeViolation> first;
};

/// Composite guarantees at every recorded step: headway, and 0 <= v_r <= v_max_follower.
inline GuaranteeCheck check_trajectory_guarantees(const Trajectory& tr, const PlatoonParams& P, double tol = 1e-9) {
    GuaranteeCheck out;
    for (std::size_t k = 0; k < tr.steps; ++k) {
        for (std::size_t r = 1; r < static_cast<std::size_t>(tr.M); ++r) {
            double v = tr.v[r][k];
            const std::pair<const char*, double> rows[] = {
                {"headway", tr.p[r][k] + P.h * v - tr.p[r - 1][k]},
                {"speed_max", v - P.v_max_follower},
                {"speed_min", -v},
            };
            for (const auto& [name, res] : rows) {
                if (res > tol) {
                    out.ok = false;
                    out.first = GuaranteeViolation{k, static_cast<int>(r + 1), name, res};
                    return out;
                }
            }
        }
    }
    return out;
}

/// CSV with one row per (step, vehicle).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os.precision(17);
    os << "step,vehicle,p,v,u,omega\n";
    for (std::size_t k = 0; k < tr.steps; ++k) {
        for (std::size_t r = 0; r < static_cast<std::size_t>(tr.M); ++r) {
            os << k << ',' << r + 1 << ',' << tr.p[r][k] << ',' << tr.v[r][k] << ',' << tr.u[r][k] << ','
               << tr.omega[r][k] << '\n';
        }
    }
}

}  // namespace rdc

#endif
