#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lorot/io.hpp"
#include "lorot/kantorovich.hpp"
#include "lorot/measure.hpp"
#include "lorot/potential.hpp"
#include "lorot/regularity.hpp"
#include "lorot/transport.hpp"

namespace lorot {

struct Tolerances {
    double duality_gap = 1e-8;
    double support_eq = 1e-8;
    double marginal = 1e-10;
    double map_residual = 1e-4;
    double tie = 1e-8;
    double snap = 1e-4;

    void validate() const {
        for (double t : {duality_gap, support_eq, marginal, map_residual, tie, snap})
            if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
    }
};

struct RunConfig {
    std::uint64_t seed = 1;
    int spatial_dim = 1;
    int m_mu = 8;
    int m_nu = 8;
    std::string profile = "slices";  // slices | marginal | infeasible | custom-file
    std::string instance_path;       // used with profile == custom-file
    std::string out_dir = "out";
    Tolerances tol;
    std::set<std::string> checks;    // empty = all of the known check groups
    int max_cycle_len = 4;
    GridSpec grid;
    int jobs = 0;                    // sweep parallelism; 0 = hardware default

    bool check_enabled(const std::string& name) const {
        return checks.empty() || checks.count(name) > 0;
    }
};

/// One verdict line of the run summary. status: pass | flag | fail | skip.
/// "flag" marks a violated hypothesis (the instance, not the code).
struct CheckRecord {
    std::string module;
    std::string name;
    std::string status;
    std::string detail;
    std::vector<int> indices;
};

struct PipelineOutcome {
    Instance instance;
    bool feasible = false;
    std::optional<SolveResult> solved;
    std::optional<PotentialPair> potentials;
    std::optional<TransportMap> map;
    std::optional<RegularityReport> regularity;
    std::vector<CheckRecord> checks;
    double duality_gap_value = 0.0;
    double map_agreement = 0.0;

    bool any(const std::string& status) const {
        for (const CheckRecord& c : checks)
            if (c.status == status) return true;
        return false;
    }

    /// 0 = all checks pass, 2 = hypothesis violated, 1 = broken invariant.
    int exit_code() const {
        if (any("fail")) return 1;
        if (any("flag")) return 2;
        return 0;
    }
};

namespace detail {

inline void record(PipelineOutcome& out, std::string module, std::string name, std::string status,
                   std::string detail = "", std::vector<int> indices = {}) {
    out.checks.push_back({std::move(module), std::move(name), std::move(status),
                          std::move(detail), std::move(indices)});
}

inline bool supports_disjoint(const Instance& inst) {
    for (const Event& x : inst.mu.points)
        for (const Event& y : inst.nu.points)
            if (x == y) return false;
    return true;
}

/// Fraction of mass-carrying sources whose plan row is concentrated on the
/// argmax target.
inline double map_plan_agreement(const TransportMap& tm, const SolveResult& solved) {
    if (tm.entries.empty()) return 0.0;
    int agree = 0;
    for (const MapEntry& e : tm.entries) {
        int col = -1;
        bool split = false;
        for (const PlanEntry& p : solved.coupling.plan) {
            if (p.i != e.source_index || p.mass <= 1e-12) continue;
            if (col >= 0) split = true;
            col = p.j;
        }
        if (!split && col == e.target_index && e.status != MapEntryStatus::Ambiguous) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(tm.entries.size());
}

}  // namespace detail

/// Runs solve -> potentials -> map -> regularity on one instance, recording a
/// verdict per check. Pure (no file output).
inline PipelineOutcome run_pipeline_core(const Instance& inst, const RunConfig& cfg) {
    cfg.tol.validate();
    PipelineOutcome out;
    out.instance = inst;

    const CostMatrix matrix = assemble_cost_matrix(inst.model, inst.mu.points, inst.nu.points);
    out.feasible = check_causally_related(matrix, inst.mu, inst.nu);
    if (cfg.check_enabled("feasibility")) {
        if (out.feasible)
            detail::record(out, "kantorovich", "feasibility", "pass");
        else
            detail::record(out, "kantorovich", "feasibility", "flag",
                           "NotCausallyRelated: no plan over finite-cost arcs");
    }
    if (!out.feasible || !cfg.check_enabled("solve")) {
        if (out.feasible) detail::record(out, "kantorovich", "solve", "skip");
        return out;
    }

    out.solved = solve_kantorovich(matrix, inst.mu, inst.nu);
    const SolveResult& solved = *out.solved;
    {
        const bool marg_ok = marginals_match(solved.coupling, cfg.tol.marginal);
        double dual_obj = 0.0;
        for (int i = 0; i < inst.mu.size(); ++i)
            dual_obj += solved.dual_u[static_cast<std::size_t>(i)] * inst.mu.weights[static_cast<std::size_t>(i)];
        for (int j = 0; j < inst.nu.size(); ++j)
            dual_obj += solved.dual_v[static_cast<std::size_t>(j)] * inst.nu.weights[static_cast<std::size_t>(j)];
        const bool dual_ok = std::abs(dual_obj - solved.total_cost.value()) <= kDualityTol;
        const bool vertex_ok =
            static_cast<int>(solved.coupling.plan.size()) <= inst.mu.size() + inst.nu.size() - 1;
        if (marg_ok && dual_ok && vertex_ok) {
            detail::record(out, "kantorovich", "solve", "pass");
        } else {
            std::string why = !marg_ok ? "marginal mismatch" : (!dual_ok ? "dual objective gap" : "non-vertex plan");
            detail::record(out, "kantorovich", "solve", "fail", why);
        }
    }

    if (cfg.check_enabled("monotonicity")) {
        const MonotonicityResult mono =
            check_c2_monotone(solved.support(), matrix, cfg.max_cycle_len);
        if (mono.monotone)
            detail::record(out, "kantorovich", "c2_monotonicity", "pass");
        else
            detail::record(out, "kantorovich", "c2_monotonicity", "fail",
                           "violating cycle on the optimal support", mono.witness);
    }

    if (!cfg.check_enabled("potential")) return out;
    bool potentials_usable = false;
    try {
        const auto support = solved.support();
        out.potentials = build_pi_solution(support, matrix, support.front());
        const PiSolutionReport rep =
            verify_pi_solution(*out.potentials, solved.coupling, matrix, cfg.tol.support_eq);
        if (!rep.finite_on_support_ok) {
            std::vector<int> idx = rep.nonfinite_phi;
            idx.insert(idx.end(), rep.nonfinite_psi.begin(), rep.nonfinite_psi.end());
            detail::record(out, "potentials", "pi_solution", "flag",
                           "construction failed: potential infinite on mass-carrying points", idx);
        } else if (!rep.inequality_ok || !rep.support_equality_ok) {
            std::vector<int> idx;
            for (const auto& [i, j] : rep.inequality_violations) {
                idx.push_back(i);
                idx.push_back(j);
            }
            for (const auto& [i, j] : rep.equality_violations) {
                idx.push_back(i);
                idx.push_back(j);
            }
            detail::record(out, "potentials", "pi_solution", "fail",
                           !rep.inequality_ok ? "dual inequality violated" : "support equality violated",
                           idx);
        } else {
            detail::record(out, "potentials", "pi_solution", "pass");
            potentials_usable = true;
        }
        if (potentials_usable) {
            out.duality_gap_value = duality_gap(*out.potentials, solved, inst.mu, inst.nu);
            if (std::abs(out.duality_gap_value) <= cfg.tol.duality_gap)
                detail::record(out, "potentials", "duality_gap", "pass");
            else
                detail::record(out, "potentials", "duality_gap", "fail",
                               "gap " + csv_g17(out.duality_gap_value));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MonotonicityViolated)
            detail::record(out, "potentials", "pi_solution", "fail", e.what());
        else
            throw;
    }

    if (cfg.check_enabled("map") && potentials_usable) {
        out.map = recover_map(*out.potentials, solved, matrix, cfg.tol.tie, cfg.tol.snap);
        const TransportMap& tm = *out.map;
        out.map_agreement = detail::map_plan_agreement(tm, solved);
        if (tm.has_ambiguity())
            detail::record(out, "transport", "argmax_ties", "flag",
                           "AmbiguousArgmax: cost ties at the tie tolerance", tm.ambiguous_sources);
        bool residual_ok = true;
        std::vector<int> bad;
        for (const MapEntry& e : tm.entries) {
            if (e.status == MapEntryStatus::GradientMatched && e.residual > cfg.tol.map_residual) {
                residual_ok = false;
                bad.push_back(e.source_index);
            }
        }
        if (residual_ok)
            detail::record(out, "transport", "twist_residual", "pass");
        else
            detail::record(out, "transport", "twist_residual", "fail",
                           "map-equation residual above tolerance", bad);
        const MapCouplingReport mcr = verify_map_induces_coupling(tm, solved, cfg.tol.marginal);
        if (mcr.ok()) {
            detail::record(out, "transport", "map_induces_coupling", "pass");
        } else if (tm.has_ambiguity()) {
            detail::record(out, "transport", "map_induces_coupling", "flag",
                           "split mass under cost ties", mcr.split_rows);
        } else {
            std::vector<int> idx = mcr.split_rows;
            idx.insert(idx.end(), mcr.mismatched_rows.begin(), mcr.mismatched_rows.end());
            detail::record(out, "transport", "map_induces_coupling", "fail",
                           "plan is not induced by the recovered map", idx);
        }
    }

    if (cfg.check_enabled("regularity")) {
        RegularityReport rep;
        rep.supports_disjoint = detail::supports_disjoint(inst);
        if (!rep.supports_disjoint) {
            rep.separation_checked = false;
            detail::record(out, "regularity", "disjoint_supports", "flag",
                           "supports intersect; separation checks skipped");
        }
        if (rep.supports_disjoint) {
            rep.timelike_delta = check_timelike_separation(solved, *inst.model);
            if (rep.timelike_delta > 0.0) {
                detail::record(out, "regularity", "timelike_separation", "pass");
            } else {
                detail::record(out, "regularity", "timelike_separation", "flag",
                               "plan forced through the light cone (delta = 0)");
            }
            if (potentials_usable) {
                const LightConeGapResult gap =
                    check_light_cone_gap(*out.potentials, solved, matrix, rep.timelike_delta / 2.0);
                rep.light_cone_min_margin = gap.min_margin;
                rep.light_cone_all_positive = gap.all_positive;
                if (gap.all_positive)
                    detail::record(out, "regularity", "light_cone_gap", "pass");
                else
                    detail::record(out, "regularity", "light_cone_gap", "flag",
                                   "non-positive margin at mass-carrying sources",
                                   gap.failing_sources);
            } else {
                detail::record(out, "regularity", "light_cone_gap", "skip");
            }
        }
        if (potentials_usable) {
            try {
                rep.region = default_region(inst.mu.points);
                rep.grid_nodes = detail::effective_nodes(cfg.grid, rep.region.dim());
                const auto [lo, hi] =
                    check_local_boundedness(*out.potentials, matrix, rep.region, cfg.grid);
                rep.phi_min = lo;
                rep.phi_max = hi;
                detail::record(out, "regularity", "local_boundedness", "pass");
                rep.semiconvexity_c =
                    check_semiconvexity(*out.potentials, matrix, rep.region, cfg.grid);
                rep.semiconvexity_c_half_grid = midpoint_semiconvexity_constant(
                    [&](const Vec& x) {
                        const ExtReal v = extend_potential(*out.potentials, matrix, Event(x));
                        if (!v.is_finite())
                            throw Error(ErrorCode::RegionLeavesDomain, "stencil left the domain");
                        return v.value();
                    },
                    rep.region, 2 * (rep.grid_nodes - 1) + 1);
                detail::record(out, "regularity", "semiconvexity", "pass");
                rep.near_optimal_diameter =
                    check_near_optimal_compactness(*out.potentials, matrix, rep.region, cfg.grid);
                detail::record(out, "regularity", "near_optimal_compactness", "pass");
            } catch (const Error& e) {
                if (e.code() == ErrorCode::RegionLeavesDomain)
                    detail::record(out, "regularity", "region", "flag",
                                   "auto-selected region leaves the finiteness domain");
                else
                    throw;
            }
        } else {
            detail::record(out, "regularity", "local_boundedness", "skip");
            detail::record(out, "regularity", "semiconvexity", "skip");
            detail::record(out, "regularity", "near_optimal_compactness", "skip");
        }
        out.regularity = rep;
    }
    return out;
}

inline void write_summary_json(const PipelineOutcome& out, const RunConfig& cfg, std::ostream& os) {
    os << "{\n";
    os << "  \"seed\": " << out.instance.seed << ",\n";
    os << "  \"profile\": \"" << out.instance.profile << "\",\n";
    os << "  \"dimension\": " << out.instance.model->dimension() << ",\n";
    os << "  \"mu_size\": " << out.instance.mu.size() << ",\n";
    os << "  \"nu_size\": " << out.instance.nu.size() << ",\n";
    if (out.solved)
        os << "  \"total_cost\": " << fmt_g17(out.solved->total_cost.value()) << ",\n";
    if (out.potentials)
        os << "  \"duality_gap\": " << fmt_g17(out.duality_gap_value) << ",\n";
    if (out.map)
        os << "  \"map_agreement\": " << fmt_g17(out.map_agreement) << ",\n";
    os << "  \"checks\": [";
    for (std::size_t k = 0; k < out.checks.size(); ++k) {
        const CheckRecord& c = out.checks[k];
        if (k) os << ",";
        os << "\n    {\"module\": \"" << c.module << "\", \"name\": \"" << c.name
           << "\", \"status\": \"" << c.status << "\", \"detail\": \"" << c.detail
           << "\", \"indices\": [";
        for (std::size_t t = 0; t < c.indices.size(); ++t) {
            if (t) os << ",";
            os << c.indices[t];
        }
        os << "]}";
    }
    os << "\n  ],\n";
    os << "  \"exit_code\": " << out.exit_code() << "\n";
    os << "}\n";
    (void)cfg;
}

inline Instance make_instance(const RunConfig& cfg) {
    if (cfg.profile == "custom-file") {
        std::ifstream in(cfg.instance_path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + cfg.instance_path);
        return read_instance_json(in);
    }
    return generate_instance(cfg.seed, cfg.spatial_dim, cfg.m_mu, cfg.m_nu,
                             profile_from_string(cfg.profile));
}

/// Full batch run: builds the instance, runs every enabled stage and writes
/// instance.json, plan.json, potentials.csv, map.csv, regularity.json and
/// summary.json into the output directory.
inline PipelineOutcome run_pipeline(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const Instance inst = make_instance(cfg);
    fs::create_directories(cfg.out_dir);
    const PipelineOutcome out = run_pipeline_core(inst, cfg);

    auto write_file = [&](const std::string& name, auto&& writer) {
        std::ofstream os(fs::path(cfg.out_dir) / name, std::ios::binary);
        if (!os) throw Error(ErrorCode::IoError, "cannot write " + name);
        writer(os);
    };
    write_file("instance.json", [&](std::ostream& os) { write_instance_json(inst, os); });
    if (out.solved) write_file("plan.json", [&](std::ostream& os) { write_plan_json(*out.solved, os); });
    if (out.potentials)
        write_file("potentials.csv", [&](std::ostream& os) { write_potentials_csv(*out.potentials, os); });
    if (out.map) write_file("map.csv", [&](std::ostream& os) { write_map_csv(*out.map, os); });
    if (out.regularity)
        write_file("regularity.json", [&](std::ostream& os) { write_regularity_json(*out.regularity, os); });
    write_file("summary.json", [&](std::ostream& os) { write_summary_json(out, cfg, os); });
    return out;
}

/// Independent re-check of stored artifacts: marginals, admissibility,
/// optimality against a fresh solve, and the potential/map/regularity stages
/// on the stored plan.
inline PipelineOutcome verify_files(const std::string& instance_path, const std::string& plan_path,
                                    const RunConfig& cfg) {
    std::ifstream ii(instance_path);
    if (!ii) throw Error(ErrorCode::IoError, "cannot open " + instance_path);
    const Instance inst = read_instance_json(ii);
    std::ifstream pi(plan_path);
    if (!pi) throw Error(ErrorCode::IoError, "cannot open " + plan_path);
    const SolveResult stored = read_plan_json(pi, inst.mu, inst.nu);

    PipelineOutcome out;
    out.instance = inst;
    const CostMatrix matrix = assemble_cost_matrix(inst.model, inst.mu.points, inst.nu.points);

    const bool marg_ok = marginals_match(stored.coupling, cfg.tol.marginal);
    detail::record(out, "kantorovich", "stored_plan_marginals", marg_ok ? "pass" : "fail");
    bool admissible = true;
    double recomputed = 0.0;
    std::vector<int> bad;
    for (const PlanEntry& e : stored.coupling.plan) {
        if (e.mass <= 0.0) continue;
        if (!matrix.at(e.i, e.j).is_finite()) {
            admissible = false;
            bad.push_back(e.i);
            bad.push_back(e.j);
        } else {
            recomputed += e.mass * matrix.at(e.i, e.j).value();
        }
    }
    detail::record(out, "kantorovich", "stored_plan_admissible", admissible ? "pass" : "fail", "",
                   bad);
    if (admissible) {
        const bool cost_ok = std::abs(recomputed - stored.total_cost.value()) <=
                             1e-8 * (1.0 + std::abs(recomputed));
        detail::record(out, "kantorovich", "stored_cost_recomputed", cost_ok ? "pass" : "fail");
        const SolveResult fresh = solve_kantorovich(matrix, inst.mu, inst.nu);
        const bool optimal = recomputed <= fresh.total_cost.value() + kDualityTol;
        detail::record(out, "kantorovich", "stored_plan_optimal", optimal ? "pass" : "fail",
                       "fresh optimum " + csv_g17(fresh.total_cost.value()));
        out.solved = stored;
        out.solved->total_cost = ExtendedCost::finite(recomputed);
        out.feasible = true;

        const auto support = out.solved->support();
        const MonotonicityResult mono = check_c2_monotone(support, matrix, cfg.max_cycle_len);
        detail::record(out, "kantorovich", "c2_monotonicity", mono.monotone ? "pass" : "fail", "",
                       mono.witness);

        // Potentials + duality against the stored plan.
        try {
            out.potentials = build_pi_solution(support, matrix, support.front());
            const PiSolutionReport rep =
                verify_pi_solution(*out.potentials, out.solved->coupling, matrix, cfg.tol.support_eq);
            if (!rep.finite_on_support_ok)
                detail::record(out, "potentials", "pi_solution", "flag",
                               "construction failed on the stored support");
            else if (!rep.ok())
                detail::record(out, "potentials", "pi_solution", "fail");
            else {
                detail::record(out, "potentials", "pi_solution", "pass");
                out.duality_gap_value = duality_gap(*out.potentials, *out.solved, inst.mu, inst.nu);
                detail::record(out, "potentials", "duality_gap",
                               std::abs(out.duality_gap_value) <= cfg.tol.duality_gap ? "pass" : "fail",
                               csv_g17(out.duality_gap_value));
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MonotonicityViolated)
                detail::record(out, "potentials", "pi_solution", "fail", e.what());
            else
                throw;
        }
    }
    return out;
}

struct SweepRow {
    std::uint64_t seed = 0;
    std::string profile;
    std::string status;
    bool has_values = false;
    double total_cost = 0.0;
    double gap = 0.0;
    double min_delta = 0.0;
    double semiconvexity_c = 0.0;
    double map_agreement = 0.0;
};

inline SweepRow sweep_one(const RunConfig& base, std::uint64_t seed, const std::string& profile) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.profile = profile;
    SweepRow row;
    row.seed = seed;
    row.profile = profile;
    const PipelineOutcome out = run_pipeline_core(make_instance(cfg), cfg);
    row.status = out.exit_code() == 0 ? "pass" : (out.exit_code() == 2 ? "flag" : "fail");
    if (out.solved && out.potentials) {
        row.has_values = true;
        row.total_cost = out.solved->total_cost.value();
        row.gap = out.duality_gap_value;
        row.min_delta = out.regularity ? out.regularity->timelike_delta : 0.0;
        row.semiconvexity_c = out.regularity ? out.regularity->semiconvexity_c : 0.0;
        row.map_agreement = out.map_agreement;
    }
    return row;
}

/// One row per (seed, profile); parallel across seeds, deterministic order.
inline std::string sweep_csv(const RunConfig& base, std::uint64_t seed_begin,
                             std::uint64_t seed_count, const std::vector<std::string>& profiles) {
    std::ostringstream os;
    os << "seed,profile,status,total_cost,duality_gap,min_delta,semiconvexity_c,map_agreement\n";
    std::vector<std::pair<std::uint64_t, std::string>> tasks;
    for (std::uint64_t k = 0; k < seed_count; ++k)
        for (const std::string& p : profiles) tasks.emplace_back(seed_begin + k, p);

    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t jobs = base.jobs > 0 ? static_cast<std::size_t>(base.jobs)
                                           : std::max<std::size_t>(1, hw ? hw : 1);
    std::vector<SweepRow> rows(tasks.size());
    std::size_t next = 0;
    while (next < tasks.size()) {
        const std::size_t batch = std::min(jobs, tasks.size() - next);
        std::vector<std::future<SweepRow>> futs;
        for (std::size_t b = 0; b < batch; ++b) {
            const auto& [sd, prof] = tasks[next + b];
            futs.push_back(std::async(std::launch::async,
                                      [&base, sd, prof] { return sweep_one(base, sd, prof); }));
        }
        for (std::size_t b = 0; b < batch; ++b) rows[next + b] = futs[b].get();
        next += batch;
    }
    for (const SweepRow& r : rows) {
        os << r.seed << "," << r.profile << "," << r.status << ",";
        if (r.has_values) {
            os << csv_g17(r.total_cost) << "," << csv_g17(r.gap) << "," << csv_g17(r.min_delta)
               << "," << csv_g17(r.semiconvexity_c) << "," << csv_g17(r.map_agreement);
        } else {
            os << ",,,,";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace lorot
