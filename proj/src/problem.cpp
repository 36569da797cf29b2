#include "desos/problem.hpp"

#include <cmath>

namespace desos::opt {

namespace {

std::string tag(const std::string& base, int entity, int t) {
    return base + "_" + std::to_string(entity) + "_" + std::to_string(t);
}

}  // namespace

BuiltProblem build_problem(const Feeder& feeder, ObjectiveKind objective, RelaxKind relax,
                           bool snapshot) {
    if (feeder.substation < 0) {
        fail(ErrorKind::validation, "build_problem: feeder is not finalized");
    }
    const int nb = feeder.num_buses();
    const int ne = feeder.num_branches();
    const int nd = feeder.num_des();
    const int T = snapshot ? 1 : feeder.horizon();
    const bool with_soc_window = !snapshot && T > 1;
    const bool with_u = objective == ObjectiveKind::f3;

    BuiltProblem built;
    built.objective = objective;
    built.relax = relax;
    built.snapshot = snapshot;
    VariableMap& vars = built.vars;
    conic::Problem& prob = built.problem;
    vars.horizon = T;

    auto grid2 = [&](int rows) {
        return std::vector<std::vector<int>>(static_cast<size_t>(rows),
                                             std::vector<int>(static_cast<size_t>(T), -1));
    };
    vars.branch_p = grid2(ne);
    vars.branch_q = grid2(ne);
    vars.branch_l = grid2(ne);
    vars.bus_v = grid2(nb);
    if (with_u) vars.bus_u = grid2(nb);
    vars.des_p = grid2(nd);
    vars.des_q = grid2(nd);
    vars.des_loss = grid2(nd);
    vars.grid_p.assign(static_cast<size_t>(T), -1);
    vars.grid_q.assign(static_cast<size_t>(T), -1);

    // Named columns.
    const double R = feeder.sub_rating;
    for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        for (int e = 0; e < ne; ++e) {
            const Branch& br = feeder.branches[static_cast<size_t>(e)];
            vars.branch_p[static_cast<size_t>(e)][ts] = prob.add_col(tag("P", e, t));
            vars.branch_q[static_cast<size_t>(e)][ts] = prob.add_col(tag("Q", e, t));
            vars.branch_l[static_cast<size_t>(e)][ts] = prob.add_col(tag("l", e, t), 0.0, br.l_max);
        }
        for (int i = 0; i < nb; ++i) {
            const Bus& bus = feeder.buses[static_cast<size_t>(i)];
            vars.bus_v[static_cast<size_t>(i)][ts] = prob.add_col(tag("v", i, t), bus.v_min, bus.v_max);
        }
        vars.grid_p[ts] = prob.add_col(tag("Pg", 0, t), -0.6 * R, R);
        vars.grid_q[ts] = prob.add_col(tag("Qg", 0, t), -0.6 * R, R);
        for (int d = 0; d < nd; ++d) {
            const DesUnit& u = feeder.des_units[static_cast<size_t>(d)];
            vars.des_p[static_cast<size_t>(d)][ts] = prob.add_col(tag("pdes", d, t), -u.s_max, u.s_max);
            vars.des_q[static_cast<size_t>(d)][ts] = prob.add_col(tag("qdes", d, t), -u.s_max, u.s_max);
            // Upper bound keeps the loss column bounded when nothing else
            // presses on it.
            const double loss_cap = u.r_eq * u.s_max * u.s_max / feeder.buses[static_cast<size_t>(feeder.bus_index(u.bus))].v_min;
            vars.des_loss[static_cast<size_t>(d)][ts] = prob.add_col(tag("ploss", d, t), 0.0, loss_cap);
        }
        if (with_u) {
            for (int i = 0; i < nb; ++i) {
                vars.bus_u[static_cast<size_t>(i)][ts] = prob.add_col(tag("u", i, t), 0.0);
            }
        }
    }
    vars.num_named = prob.num_cols;

    // DES units per bus.
    std::vector<std::vector<int>> des_at(static_cast<size_t>(nb));
    for (int d = 0; d < nd; ++d) {
        des_at[static_cast<size_t>(feeder.bus_index(feeder.des_units[static_cast<size_t>(d)].bus))].push_back(d);
    }

    for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        // Snapshot mode evaluates the first period of the profiles.
        const size_t tp = snapshot ? 0 : ts;

        // Power balance (10a)/(10b) at each bus.
        for (int i = 0; i < nb; ++i) {
            const size_t is = static_cast<size_t>(i);
            const Bus& bus = feeder.buses[is];
            conic::LinearRow rp, rq;
            for (int e : feeder.child_branches[is]) {
                rp.terms.push_back({vars.branch_p[static_cast<size_t>(e)][ts], 1.0});
                rq.terms.push_back({vars.branch_q[static_cast<size_t>(e)][ts], 1.0});
            }
            const int pe = feeder.parent_branch[is];
            if (pe >= 0) {
                const Branch& br = feeder.branches[static_cast<size_t>(pe)];
                rp.terms.push_back({vars.branch_p[static_cast<size_t>(pe)][ts], -1.0});
                rp.terms.push_back({vars.branch_l[static_cast<size_t>(pe)][ts], br.r});
                rq.terms.push_back({vars.branch_q[static_cast<size_t>(pe)][ts], -1.0});
                rq.terms.push_back({vars.branch_l[static_cast<size_t>(pe)][ts], br.x});
            }
            for (int d : des_at[is]) {
                rp.terms.push_back({vars.des_p[static_cast<size_t>(d)][ts], -1.0});
                rq.terms.push_back({vars.des_q[static_cast<size_t>(d)][ts], -1.0});
            }
            if (i == feeder.substation) {
                rp.terms.push_back({vars.grid_p[ts], -1.0});
                rq.terms.push_back({vars.grid_q[ts], -1.0});
            }
            if (bus.k_tx > 0.0) {
                rp.terms.push_back({vars.bus_v[is][ts], bus.k_tx});
            }
            rp.rhs = feeder.profiles.pv[is][tp] - feeder.profiles.load_p[is][tp];
            rq.rhs = -feeder.profiles.load_q[is][tp];
            prob.eq_rows.push_back(std::move(rp));
            prob.eq_rows.push_back(std::move(rq));
        }

        // Voltage drop (10c) along each branch.
        for (int e = 0; e < ne; ++e) {
            const size_t es = static_cast<size_t>(e);
            const Branch& br = feeder.branches[es];
            const int up = feeder.bus_index(br.from_bus);
            const int dn = feeder.bus_index(br.to_bus);
            conic::LinearRow row;
            row.terms.push_back({vars.bus_v[static_cast<size_t>(up)][ts], 1.0});
            row.terms.push_back({vars.bus_v[static_cast<size_t>(dn)][ts], -1.0});
            row.terms.push_back({vars.branch_p[es][ts], -2.0 * br.r});
            row.terms.push_back({vars.branch_q[es][ts], -2.0 * br.x});
            row.terms.push_back({vars.branch_l[es][ts], br.r * br.r + br.x * br.x});
            row.rhs = 0.0;
            prob.eq_rows.push_back(std::move(row));
        }

        // Branch relaxation cone and thermal ball, with cone-local copies so
        // no column sits in two cone blocks.
        for (int e = 0; e < ne; ++e) {
            const size_t es = static_cast<size_t>(e);
            const Branch& br = feeder.branches[es];
            const int up = feeder.bus_index(br.from_bus);
            const int vcp = prob.add_col(tag("vcp", e, t));
            const int pcp = prob.add_col(tag("Pcp", e, t));
            const int qcp = prob.add_col(tag("Qcp", e, t));
            const int sth = prob.add_col(tag("sth", e, t), br.s_max, br.s_max);
            prob.eq_rows.push_back({{{vcp, 1.0}, {vars.bus_v[static_cast<size_t>(up)][ts], -1.0}}, 0.0});
            prob.eq_rows.push_back({{{pcp, 1.0}, {vars.branch_p[es][ts], -1.0}}, 0.0});
            prob.eq_rows.push_back({{{qcp, 1.0}, {vars.branch_q[es][ts], -1.0}}, 0.0});
            prob.cones.push_back(
                {conic::ConeKind::rsoc,
                 {vars.branch_l[es][ts], vcp, vars.branch_p[es][ts], vars.branch_q[es][ts]}});
            prob.cones.push_back({conic::ConeKind::soc, {sth, pcp, qcp}});
            if (relax == RelaxKind::ch) {
                // Hull cut (the one extra row of the CH relaxation).
                const Bus& bus = feeder.buses[static_cast<size_t>(up)];
                conic::LinearRow cut;
                cut.terms.push_back({vars.branch_l[es][ts], bus.v_max});
                cut.terms.push_back({vars.bus_v[static_cast<size_t>(up)][ts], br.l_max});
                cut.rhs = br.l_max * (bus.v_max + bus.v_nom);
                prob.ineq_rows.push_back(std::move(cut));
            }
        }

        // Storage: loss cone, converter ball and (CH) the two loss cuts.
        for (int d = 0; d < nd; ++d) {
            const size_t ds = static_cast<size_t>(d);
            const DesUnit& u = feeder.des_units[ds];
            const int bi = feeder.bus_index(u.bus);
            const Bus& bus = feeder.buses[static_cast<size_t>(bi)];
            const int vcp = prob.add_col(tag("vdcp", d, t));
            const int w1 = prob.add_col(tag("w1", d, t));
            const int w2 = prob.add_col(tag("w2", d, t));
            const int sth = prob.add_col(tag("sdes", d, t), u.s_max, u.s_max);
            prob.eq_rows.push_back({{{vcp, 1.0}, {vars.bus_v[static_cast<size_t>(bi)][ts], -1.0}}, 0.0});
            prob.eq_rows.push_back({{{w1, 1.0}, {vars.des_p[ds][ts], -std::sqrt(u.r_eq)}}, 0.0});
            prob.eq_rows.push_back({{{w2, 1.0}, {vars.des_q[ds][ts], -std::sqrt(u.r_cvt)}}, 0.0});
            prob.cones.push_back({conic::ConeKind::rsoc, {vars.des_loss[ds][ts], vcp, w1, w2}});
            prob.cones.push_back({conic::ConeKind::soc, {sth, vars.des_p[ds][ts], vars.des_q[ds][ts]}});
            if (relax == RelaxKind::ch) {
                const double e_cap = u.r_eq * u.s_max * u.s_max;
                // C2 (asymmetry cut): r_batt q^2 <= e_cap - v_min p_loss,
                // written as a rotated cone on an auxiliary headroom column.
                const int head = prob.add_col(tag("c2h", d, t), 0.0);
                const int one = prob.add_col(tag("c2one", d, t), 1.0, 1.0);
                const int qc2 = prob.add_col(tag("qc2", d, t));
                prob.eq_rows.push_back(
                    {{{head, u.r_batt}, {vars.des_loss[ds][ts], bus.v_min}}, e_cap});
                prob.eq_rows.push_back({{{qc2, 1.0}, {vars.des_q[ds][ts], -1.0}}, 0.0});
                prob.cones.push_back({conic::ConeKind::rsoc, {head, one, qc2}});
                // C3 (chord cut), linear.
                conic::LinearRow chord;
                chord.terms.push_back({vars.des_loss[ds][ts], bus.v_min * bus.v_max});
                chord.terms.push_back({vars.bus_v[static_cast<size_t>(bi)][ts], e_cap});
                chord.rhs = e_cap * (bus.v_min + bus.v_max);
                prob.ineq_rows.push_back(std::move(chord));
            }
        }

        // Voltage-deviation epigraph (13b).
        if (with_u) {
            for (int i = 0; i < nb; ++i) {
                const size_t is = static_cast<size_t>(i);
                const double set = feeder.buses[is].v_set_at(snapshot ? 0 : t);
                prob.ineq_rows.push_back(
                    {{{vars.bus_v[is][ts], 1.0}, {vars.bus_u[is][ts], -1.0}}, set});
                prob.ineq_rows.push_back(
                    {{{vars.bus_v[is][ts], -1.0}, {vars.bus_u[is][ts], -1.0}}, -set});
            }
        }
    }

    // Stored-energy window (8b): two-sided rows of cumulative sums.
    if (with_soc_window) {
        const double dt = feeder.profiles.dt;
        for (int d = 0; d < nd; ++d) {
            const size_t ds = static_cast<size_t>(d);
            const DesUnit& u = feeder.des_units[ds];
            for (int t = 0; t < T; ++t) {
                conic::LinearRow hi, lo;
                for (int tp = 0; tp <= t; ++tp) {
                    const size_t tps = static_cast<size_t>(tp);
                    hi.terms.push_back({vars.des_p[ds][tps], -dt});
                    hi.terms.push_back({vars.des_loss[ds][tps], -dt});
                    lo.terms.push_back({vars.des_p[ds][tps], dt});
                    lo.terms.push_back({vars.des_loss[ds][tps], dt});
                }
                hi.rhs = u.e_max - u.e_surplus;  // energy <= e_max
                lo.rhs = u.e_surplus - u.e_min;  // energy >= e_min
                prob.ineq_rows.push_back(std::move(hi));
                prob.ineq_rows.push_back(std::move(lo));
            }
        }
    }

    vars.num_cols = prob.num_cols;
    prob.objective = objective_vector(feeder, objective, vars);
    prob.objective.resize(static_cast<size_t>(prob.num_cols), 0.0);
    conic::validate_problem(prob);
    return built;
}

std::vector<double> objective_vector(const Feeder& feeder, ObjectiveKind objective,
                                     const VariableMap& vars) {
    std::vector<double> obj(static_cast<size_t>(vars.num_cols), 0.0);
    const int T = vars.horizon;
    switch (objective) {
        case ObjectiveKind::f1: {
            if (feeder.profiles.price.empty()) {
                fail(ErrorKind::validation, "objective f1 requires a price series");
            }
            for (int t = 0; t < T; ++t) {
                const size_t tp = static_cast<size_t>(T == 1 ? 0 : t);
                obj[static_cast<size_t>(vars.grid_p[static_cast<size_t>(t)])] =
                    feeder.profiles.price[tp] * feeder.profiles.dt * feeder.base_mva;
            }
            break;
        }
        case ObjectiveKind::f2: {
            for (int t = 0; t < T; ++t) {
                const size_t ts = static_cast<size_t>(t);
                for (size_t e = 0; e < vars.branch_l.size(); ++e) {
                    obj[static_cast<size_t>(vars.branch_l[e][ts])] = feeder.branches[e].r;
                }
                for (size_t i = 0; i < vars.bus_v.size(); ++i) {
                    if (feeder.buses[i].k_tx > 0.0) {
                        obj[static_cast<size_t>(vars.bus_v[i][ts])] = feeder.buses[i].k_tx;
                    }
                }
                for (size_t d = 0; d < vars.des_loss.size(); ++d) {
                    obj[static_cast<size_t>(vars.des_loss[d][ts])] = 1.0;
                }
            }
            break;
        }
        case ObjectiveKind::f3: {
            if (vars.bus_u.empty()) {
                fail(ErrorKind::validation, "objective f3 requires epigraph columns in the map");
            }
            for (int t = 0; t < T; ++t) {
                for (size_t i = 0; i < vars.bus_u.size(); ++i) {
                    obj[static_cast<size_t>(vars.bus_u[i][static_cast<size_t>(t)])] = 1.0;
                }
            }
            break;
        }
    }
    return obj;
}

NetworkState extract_state(const conic::Solution& solution, const VariableMap& vars,
                           const Feeder& feeder) {
    if (solution.status == conic::SolveStatus::infeasible ||
        solution.status == conic::SolveStatus::unbounded ||
        solution.status == conic::SolveStatus::numerical_error) {
        fail(ErrorKind::solver,
             std::string("extract_state: solver returned ") + conic::to_string(solution.status));
    }
    if (static_cast<int>(solution.x.size()) != vars.num_cols) {
        fail(ErrorKind::dimension, "extract_state: solution size does not match variable map");
    }
    const auto& x = solution.x;
    const int T = vars.horizon;

    NetworkState st;
    st.horizon = T;
    const size_t nb = static_cast<size_t>(feeder.num_buses());
    const size_t ne = static_cast<size_t>(feeder.num_branches());
    const size_t ndu = static_cast<size_t>(feeder.num_des());
    auto alloc = [&](size_t rows) {
        return std::vector<std::vector<double>>(rows, std::vector<double>(static_cast<size_t>(T), 0.0));
    };
    st.branch_p = alloc(ne);
    st.branch_q = alloc(ne);
    st.branch_l = alloc(ne);
    st.v = alloc(nb);
    st.p_inj = alloc(nb);
    st.q_inj = alloc(nb);
    st.p_grid.assign(static_cast<size_t>(T), 0.0);
    st.q_grid.assign(static_cast<size_t>(T), 0.0);
    st.p_des = alloc(ndu);
    st.q_des = alloc(ndu);
    st.p_loss = alloc(ndu);

    for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        const size_t tp = static_cast<size_t>(T == 1 ? 0 : t);
        for (size_t e = 0; e < ne; ++e) {
            st.branch_p[e][ts] = x[static_cast<size_t>(vars.branch_p[e][ts])];
            st.branch_q[e][ts] = x[static_cast<size_t>(vars.branch_q[e][ts])];
            st.branch_l[e][ts] = x[static_cast<size_t>(vars.branch_l[e][ts])];
        }
        for (size_t i = 0; i < nb; ++i) {
            st.v[i][ts] = x[static_cast<size_t>(vars.bus_v[i][ts])];
        }
        st.p_grid[ts] = x[static_cast<size_t>(vars.grid_p[ts])];
        st.q_grid[ts] = x[static_cast<size_t>(vars.grid_q[ts])];
        for (size_t d = 0; d < ndu; ++d) {
            st.p_des[d][ts] = x[static_cast<size_t>(vars.des_p[d][ts])];
            st.q_des[d][ts] = x[static_cast<size_t>(vars.des_q[d][ts])];
            st.p_loss[d][ts] = x[static_cast<size_t>(vars.des_loss[d][ts])];
        }
        // Net modeled injections (PV, load, storage, transformer draw).
        for (size_t i = 0; i < nb; ++i) {
            st.p_inj[i][ts] = feeder.profiles.pv[i][tp] - feeder.profiles.load_p[i][tp] -
                              feeder.buses[i].k_tx * st.v[i][ts];
            st.q_inj[i][ts] = -feeder.profiles.load_q[i][tp];
        }
        for (size_t d = 0; d < ndu; ++d) {
            const size_t bi = static_cast<size_t>(feeder.bus_index(feeder.des_units[d].bus));
            st.p_inj[bi][ts] += st.p_des[d][ts];
            st.q_inj[bi][ts] += st.q_des[d][ts];
        }
    }
    return st;
}

}  // namespace desos::opt
