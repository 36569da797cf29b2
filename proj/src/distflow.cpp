#include "desos/distflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace desos {

NetworkState NetworkState::zeros(const Feeder& feeder) {
    NetworkState st;
    st.horizon = feeder.horizon();
    const size_t nb = static_cast<size_t>(feeder.num_buses());
    const size_t ne = static_cast<size_t>(feeder.num_branches());
    const size_t nd = static_cast<size_t>(feeder.num_des());
    const size_t T = static_cast<size_t>(st.horizon);
    st.branch_p.assign(ne, std::vector<double>(T, 0.0));
    st.branch_q.assign(ne, std::vector<double>(T, 0.0));
    st.branch_l.assign(ne, std::vector<double>(T, 0.0));
    const double v0 = feeder.substation >= 0 ? feeder.buses[static_cast<size_t>(feeder.substation)].v_nom : 1.0;
    st.v.assign(nb, std::vector<double>(T, v0));
    st.p_inj.assign(nb, std::vector<double>(T, 0.0));
    st.q_inj.assign(nb, std::vector<double>(T, 0.0));
    st.p_grid.assign(T, 0.0);
    st.q_grid.assign(T, 0.0);
    st.p_des.assign(nd, std::vector<double>(T, 0.0));
    st.q_des.assign(nd, std::vector<double>(T, 0.0));
    st.p_loss.assign(nd, std::vector<double>(T, 0.0));
    return st;
}

BranchFlowPoint NetworkState::point(const Feeder& feeder, int e, int t) const {
    const Branch& br = feeder.branches[static_cast<size_t>(e)];
    const int from = feeder.bus_index(br.from_bus);
    return BranchFlowPoint{branch_p[static_cast<size_t>(e)][static_cast<size_t>(t)],
                           branch_q[static_cast<size_t>(e)][static_cast<size_t>(t)],
                           branch_l[static_cast<size_t>(e)][static_cast<size_t>(t)],
                           v[static_cast<size_t>(from)][static_cast<size_t>(t)]};
}

double ResidualReport::max_abs() const {
    double m = 0.0;
    for (const auto* fam : {&balance_p, &balance_q, &voltage, &quad}) {
        for (const auto& row : *fam) {
            for (double r : row) m = std::max(m, std::abs(r));
        }
    }
    return m;
}

double ResidualReport::max_abs_quad() const {
    double m = 0.0;
    for (const auto& row : quad) {
        for (double r : row) m = std::max(m, std::abs(r));
    }
    return m;
}

namespace distflow {

namespace {

void check_dimensions(const Feeder& feeder, const NetworkState& state) {
    const size_t nb = static_cast<size_t>(feeder.num_buses());
    const size_t ne = static_cast<size_t>(feeder.num_branches());
    const size_t T = static_cast<size_t>(state.horizon);
    auto bad = [&](const auto& m, size_t rows) {
        if (m.size() != rows) return true;
        for (const auto& r : m) {
            if (r.size() != T) return true;
        }
        return false;
    };
    if (state.horizon != feeder.horizon() || bad(state.branch_p, ne) || bad(state.branch_q, ne) ||
        bad(state.branch_l, ne) || bad(state.v, nb) || bad(state.p_inj, nb) || bad(state.q_inj, nb) ||
        state.p_grid.size() != T || state.q_grid.size() != T) {
        fail(ErrorKind::dimension, "network state does not match feeder dimensions");
    }
}

}  // namespace

ResidualReport eval_residuals(const Feeder& feeder, const NetworkState& state) {
    check_dimensions(feeder, state);
    const int nb = feeder.num_buses();
    const int ne = feeder.num_branches();
    const int T = state.horizon;

    ResidualReport rep;
    rep.balance_p.assign(static_cast<size_t>(nb), std::vector<double>(static_cast<size_t>(T), 0.0));
    rep.balance_q = rep.balance_p;
    rep.voltage.assign(static_cast<size_t>(ne), std::vector<double>(static_cast<size_t>(T), 0.0));
    rep.quad = rep.voltage;

    for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        for (int i = 0; i < nb; ++i) {
            const size_t is = static_cast<size_t>(i);
            double sum_p = 0.0, sum_q = 0.0;
            for (int e : feeder.child_branches[is]) {
                sum_p += state.branch_p[static_cast<size_t>(e)][ts];
                sum_q += state.branch_q[static_cast<size_t>(e)][ts];
            }
            const int pe = feeder.parent_branch[is];
            if (pe >= 0) {
                const Branch& br = feeder.branches[static_cast<size_t>(pe)];
                sum_p -= state.branch_p[static_cast<size_t>(pe)][ts] - br.r * state.branch_l[static_cast<size_t>(pe)][ts];
                sum_q -= state.branch_q[static_cast<size_t>(pe)][ts] - br.x * state.branch_l[static_cast<size_t>(pe)][ts];
            }
            double pi = state.p_inj[is][ts];
            double qi = state.q_inj[is][ts];
            if (i == feeder.substation) {
                pi += state.p_grid[ts];
                qi += state.q_grid[ts];
            }
            rep.balance_p[is][ts] = pi - sum_p;
            rep.balance_q[is][ts] = qi - sum_q;
        }
        for (int e = 0; e < ne; ++e) {
            const size_t es = static_cast<size_t>(e);
            const Branch& br = feeder.branches[es];
            const size_t up = static_cast<size_t>(feeder.bus_index(br.from_bus));
            const size_t dn = static_cast<size_t>(feeder.bus_index(br.to_bus));
            const double P = state.branch_p[es][ts];
            const double Q = state.branch_q[es][ts];
            const double l = state.branch_l[es][ts];
            rep.voltage[es][ts] = state.v[up][ts] - state.v[dn][ts] - 2.0 * (br.r * P + br.x * Q) +
                                  (br.r * br.r + br.x * br.x) * l;
            rep.quad[es][ts] = state.v[up][ts] * l - P * P - Q * Q;
        }
    }
    return rep;
}

namespace {

struct PeriodFlows {
    std::vector<double> P, Q, l;  // per branch
    std::vector<double> v;        // per bus
    double p_grid = 0.0, q_grid = 0.0;
};

// One period of backward/forward sweep. inj excludes the substation slack
// and the transformer term k*v, which is applied here against the current
// voltage iterate.
PeriodFlows sweep_single(const Feeder& feeder, const std::vector<double>& inj_p,
                         const std::vector<double>& inj_q, double v_root,
                         const SweepSettings& settings) {
    const int nb = feeder.num_buses();
    const int ne = feeder.num_branches();
    PeriodFlows flows;
    flows.P.assign(static_cast<size_t>(ne), 0.0);
    flows.Q.assign(static_cast<size_t>(ne), 0.0);
    flows.l.assign(static_cast<size_t>(ne), 0.0);
    flows.v.assign(static_cast<size_t>(nb), v_root);

    std::vector<int> to_index(static_cast<size_t>(ne));
    std::vector<int> from_index(static_cast<size_t>(ne));
    for (int e = 0; e < ne; ++e) {
        to_index[static_cast<size_t>(e)] = feeder.bus_index(feeder.branches[static_cast<size_t>(e)].to_bus);
        from_index[static_cast<size_t>(e)] = feeder.bus_index(feeder.branches[static_cast<size_t>(e)].from_bus);
    }

    auto backward = [&]() {
        for (auto it = feeder.bus_order.rbegin(); it != feeder.bus_order.rend(); ++it) {
            const int k = *it;
            const size_t ks = static_cast<size_t>(k);
            const int pe = feeder.parent_branch[ks];
            if (pe < 0) continue;
            const Branch& br = feeder.branches[static_cast<size_t>(pe)];
            double need_p = -inj_p[ks] + feeder.buses[ks].k_tx * flows.v[ks];
            double need_q = -inj_q[ks];
            for (int ce : feeder.child_branches[ks]) {
                need_p += flows.P[static_cast<size_t>(ce)];
                need_q += flows.Q[static_cast<size_t>(ce)];
            }
            flows.P[static_cast<size_t>(pe)] = need_p + br.r * flows.l[static_cast<size_t>(pe)];
            flows.Q[static_cast<size_t>(pe)] = need_q + br.x * flows.l[static_cast<size_t>(pe)];
        }
    };

    double dv = 0.0;
    int iter = 0;
    for (iter = 0; iter < settings.max_iter; ++iter) {
        backward();
        dv = 0.0;
        for (int u : feeder.bus_order) {
            for (int e : feeder.child_branches[static_cast<size_t>(u)]) {
                const size_t es = static_cast<size_t>(e);
                const Branch& br = feeder.branches[es];
                const double vs = flows.v[static_cast<size_t>(u)];
                flows.l[es] = (flows.P[es] * flows.P[es] + flows.Q[es] * flows.Q[es]) / vs;
                const double v_new = vs - 2.0 * (br.r * flows.P[es] + br.x * flows.Q[es]) +
                                     (br.r * br.r + br.x * br.x) * flows.l[es];
                const size_t dn = static_cast<size_t>(to_index[es]);
                const double v_next = flows.v[dn] + settings.damping * (v_new - flows.v[dn]);
                if (!(v_next > 0.0) || !std::isfinite(v_next)) {
                    fail(ErrorKind::solver, "voltage collapse at bus " +
                                                std::to_string(feeder.branches[es].to_bus) +
                                                " during sweep");
                }
                dv = std::max(dv, std::abs(v_next - flows.v[dn]));
                flows.v[dn] = v_next;
            }
        }
        if (dv <= settings.tol) break;
    }
    if (dv > settings.tol) {
        fail(ErrorKind::solver, "sweep did not converge after " + std::to_string(settings.max_iter) +
                                    " iterations (last voltage update " + std::to_string(dv) + ")");
    }
    // Final consistency pass with the settled currents so the balance
    // equations hold exactly.
    backward();

    const size_t root = static_cast<size_t>(feeder.substation);
    flows.p_grid = -inj_p[root] + feeder.buses[root].k_tx * flows.v[root];
    flows.q_grid = -inj_q[root];
    for (int ce : feeder.child_branches[root]) {
        flows.p_grid += flows.P[static_cast<size_t>(ce)];
        flows.q_grid += flows.Q[static_cast<size_t>(ce)];
    }
    return flows;
}

}  // namespace

NetworkState sweep_solve(const Feeder& feeder, const std::vector<std::vector<double>>& inj_p,
                         const std::vector<std::vector<double>>& inj_q, double v_root,
                         const SweepSettings& settings) {
    const size_t nb = static_cast<size_t>(feeder.num_buses());
    const int T = feeder.horizon();
    if (inj_p.size() != nb || inj_q.size() != nb) {
        fail(ErrorKind::dimension, "injection arrays do not match bus count");
    }
    for (const auto& row : inj_p) {
        if (static_cast<int>(row.size()) != T) fail(ErrorKind::dimension, "injection horizon mismatch");
    }

    NetworkState st = NetworkState::zeros(feeder);
    std::vector<double> pt(nb), qt(nb);
    for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        for (size_t i = 0; i < nb; ++i) {
            pt[i] = inj_p[i][ts];
            qt[i] = inj_q[i][ts];
        }
        const PeriodFlows flows = sweep_single(feeder, pt, qt, v_root, settings);
        for (int e = 0; e < feeder.num_branches(); ++e) {
            const size_t es = static_cast<size_t>(e);
            st.branch_p[es][ts] = flows.P[es];
            st.branch_q[es][ts] = flows.Q[es];
            st.branch_l[es][ts] = flows.l[es];
        }
        for (size_t i = 0; i < nb; ++i) {
            st.v[i][ts] = flows.v[i];
            st.p_inj[i][ts] = pt[i] - feeder.buses[i].k_tx * flows.v[i];
            st.q_inj[i][ts] = qt[i];
        }
        st.p_grid[ts] = flows.p_grid;
        st.q_grid[ts] = flows.q_grid;
    }
    return st;
}

double me_branch(const Feeder& feeder, const NetworkState& state) {
    check_dimensions(feeder, state);
    double worst = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < feeder.num_branches(); ++e) {
        const size_t up = static_cast<size_t>(feeder.bus_index(feeder.branches[static_cast<size_t>(e)].from_bus));
        for (int t = 0; t < state.horizon; ++t) {
            const size_t es = static_cast<size_t>(e), ts = static_cast<size_t>(t);
            const double P = state.branch_p[es][ts];
            const double Q = state.branch_q[es][ts];
            worst = std::max(worst, state.v[up][ts] * state.branch_l[es][ts] - P * P - Q * Q);
        }
    }
    return feeder.num_branches() == 0 ? 0.0 : worst;
}

std::optional<double> me_des(const Feeder& feeder, const NetworkState& state) {
    if (feeder.num_des() == 0) return std::nullopt;
    double worst = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < feeder.num_des(); ++d) {
        const DesUnit& u = feeder.des_units[static_cast<size_t>(d)];
        const size_t bus = static_cast<size_t>(feeder.bus_index(u.bus));
        for (int t = 0; t < state.horizon; ++t) {
            const size_t ds = static_cast<size_t>(d), ts = static_cast<size_t>(t);
            const double p = state.p_des[ds][ts];
            const double q = state.q_des[ds][ts];
            worst = std::max(worst, state.p_loss[ds][ts] * state.v[bus][ts] - u.r_eq * p * p -
                                        u.r_cvt * q * q);
        }
    }
    return worst;
}

double evaluate_objective(const Feeder& feeder, const NetworkState& state, ObjectiveKind objective) {
    const int T = state.horizon;
    double total = 0.0;
    switch (objective) {
        case ObjectiveKind::f1:
            for (int t = 0; t < T; ++t) {
                total += feeder.profiles.price[static_cast<size_t>(t)] * state.p_grid[static_cast<size_t>(t)] *
                         feeder.base_mva * feeder.profiles.dt;
            }
            break;
        case ObjectiveKind::f2:
            for (int t = 0; t < T; ++t) {
                const size_t ts = static_cast<size_t>(t);
                for (int e = 0; e < feeder.num_branches(); ++e) {
                    total += feeder.branches[static_cast<size_t>(e)].r * state.branch_l[static_cast<size_t>(e)][ts];
                }
                for (int i = 0; i < feeder.num_buses(); ++i) {
                    total += feeder.buses[static_cast<size_t>(i)].k_tx * state.v[static_cast<size_t>(i)][ts];
                }
                for (int d = 0; d < feeder.num_des(); ++d) {
                    total += state.p_loss[static_cast<size_t>(d)][ts];
                }
            }
            break;
        case ObjectiveKind::f3:
            for (int t = 0; t < T; ++t) {
                for (int i = 0; i < feeder.num_buses(); ++i) {
                    const Bus& bus = feeder.buses[static_cast<size_t>(i)];
                    total += std::abs(state.v[static_cast<size_t>(i)][static_cast<size_t>(t)] - bus.v_set_at(t));
                }
            }
            break;
    }
    return total;
}

distflow::Recovery recover_feasible(const Feeder& feeder, const NetworkState& relaxed,
                                    ObjectiveKind objective, double relaxation_oov) {
    check_dimensions(feeder, relaxed);
    const size_t nb = static_cast<size_t>(feeder.num_buses());
    const int T = relaxed.horizon;

    std::vector<std::vector<double>> inj_p(nb, std::vector<double>(static_cast<size_t>(T), 0.0));
    std::vector<std::vector<double>> inj_q = inj_p;
    for (size_t i = 0; i < nb; ++i) {
        for (int t = 0; t < T; ++t) {
            const size_t ts = static_cast<size_t>(t);
            inj_p[i][ts] = feeder.profiles.pv[i][ts] - feeder.profiles.load_p[i][ts];
            inj_q[i][ts] = -feeder.profiles.load_q[i][ts];
        }
    }
    for (int d = 0; d < feeder.num_des(); ++d) {
        const size_t bus = static_cast<size_t>(feeder.bus_index(feeder.des_units[static_cast<size_t>(d)].bus));
        for (int t = 0; t < T; ++t) {
            inj_p[bus][static_cast<size_t>(t)] += relaxed.p_des[static_cast<size_t>(d)][static_cast<size_t>(t)];
            inj_q[bus][static_cast<size_t>(t)] += relaxed.q_des[static_cast<size_t>(d)][static_cast<size_t>(t)];
        }
    }

    Recovery rec;
    rec.state = NetworkState::zeros(feeder);
    std::vector<double> pt(nb), qt(nb);
    const size_t root = static_cast<size_t>(feeder.substation);
    for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        for (size_t i = 0; i < nb; ++i) {
            pt[i] = inj_p[i][ts];
            qt[i] = inj_q[i][ts];
        }
        // Fix the substation voltage at the relaxed solution's value.
        const PeriodFlows flows = sweep_single(feeder, pt, qt, relaxed.v[root][ts], SweepSettings{});
        for (int e = 0; e < feeder.num_branches(); ++e) {
            const size_t es = static_cast<size_t>(e);
            rec.state.branch_p[es][ts] = flows.P[es];
            rec.state.branch_q[es][ts] = flows.Q[es];
            rec.state.branch_l[es][ts] = flows.l[es];
        }
        for (size_t i = 0; i < nb; ++i) {
            rec.state.v[i][ts] = flows.v[i];
            rec.state.p_inj[i][ts] = pt[i] - feeder.buses[i].k_tx * flows.v[i];
            rec.state.q_inj[i][ts] = qt[i];
        }
        rec.state.p_grid[ts] = flows.p_grid;
        rec.state.q_grid[ts] = flows.q_grid;
    }
    for (int d = 0; d < feeder.num_des(); ++d) {
        const DesUnit& u = feeder.des_units[static_cast<size_t>(d)];
        const size_t bus = static_cast<size_t>(feeder.bus_index(u.bus));
        for (int t = 0; t < T; ++t) {
            const size_t ds = static_cast<size_t>(d), ts = static_cast<size_t>(t);
            const double p = relaxed.p_des[ds][ts];
            const double q = relaxed.q_des[ds][ts];
            rec.state.p_des[ds][ts] = p;
            rec.state.q_des[ds][ts] = q;
            // Exact loss relation at the recovered voltage.
            rec.state.p_loss[ds][ts] = (u.r_eq * p * p + u.r_cvt * q * q) / rec.state.v[bus][ts];
        }
    }

    rec.max_residual = eval_residuals(feeder, rec.state).max_abs();
    rec.objective = evaluate_objective(feeder, rec.state, objective);
    rec.gap = rec.objective - relaxation_oov;

    double viol = 0.0;
    for (int e = 0; e < feeder.num_branches(); ++e) {
        const size_t es = static_cast<size_t>(e);
        const Branch& br = feeder.branches[es];
        for (int t = 0; t < T; ++t) {
            const size_t ts = static_cast<size_t>(t);
            const double P = rec.state.branch_p[es][ts];
            const double Q = rec.state.branch_q[es][ts];
            viol = std::max(viol, rec.state.branch_l[es][ts] - br.l_max);
            viol = std::max(viol, P * P + Q * Q - br.s_max * br.s_max);
        }
    }
    for (size_t i = 0; i < nb; ++i) {
        const Bus& bus = feeder.buses[i];
        for (int t = 0; t < T; ++t) {
            const size_t ts = static_cast<size_t>(t);
            viol = std::max(viol, rec.state.v[i][ts] - bus.v_max);
            viol = std::max(viol, bus.v_min - rec.state.v[i][ts]);
        }
    }
    // Stored-energy window with the recovered (exact) losses.
    for (int d = 0; d < feeder.num_des(); ++d) {
        const DesUnit& u = feeder.des_units[static_cast<size_t>(d)];
        if (T <= 1) break;
        double energy = u.e_surplus;
        for (int t = 0; t < T; ++t) {
            const size_t ds = static_cast<size_t>(d), ts = static_cast<size_t>(t);
            energy -= (rec.state.p_des[ds][ts] + rec.state.p_loss[ds][ts]) * feeder.profiles.dt;
            viol = std::max(viol, energy - u.e_max);
            viol = std::max(viol, u.e_min - energy);
        }
    }
    rec.max_bound_violation = viol;
    return rec;
}

}  // namespace distflow
}  // namespace desos
