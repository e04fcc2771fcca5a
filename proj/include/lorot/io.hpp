#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorot/kantorovich.hpp"
#include "lorot/measure.hpp"
#include "lorot/potential.hpp"
#include "lorot/regularity.hpp"
#include "lorot/transport.hpp"

namespace lorot {

// Writers are hand-rolled with fixed key order and %.17g floats, so equal
// inputs produce byte-identical files.

inline std::string fmt_g17(double v) {
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_g17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline void write_points(std::ostream& os, const std::vector<Event>& pts) {
    os << "[";
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (k) os << ",";
        os << "[";
        for (int a = 0; a < pts[k].dim(); ++a) {
            if (a) os << ",";
            os << fmt_g17(pts[k].coords[a]);
        }
        os << "]";
    }
    os << "]";
}

inline void write_weights(std::ostream& os, const std::vector<double>& ws) {
    os << "[";
    for (std::size_t k = 0; k < ws.size(); ++k) {
        if (k) os << ",";
        os << fmt_g17(ws[k]);
    }
    os << "]";
}

}  // namespace detail

inline void write_instance_json(const Instance& inst, std::ostream& os) {
    os << "{\n";
    os << "  \"dimension\": " << inst.model->dimension() << ",\n";
    os << "  \"tau\": \"2t\",\n";
    os << "  \"mu\": {\"points\": ";
    detail::write_points(os, inst.mu.points);
    os << ", \"weights\": ";
    detail::write_weights(os, inst.mu.weights);
    os << "},\n";
    os << "  \"nu\": {\"points\": ";
    detail::write_points(os, inst.nu.points);
    os << ", \"weights\": ";
    detail::write_weights(os, inst.nu.weights);
    os << "},\n";
    os << "  \"seed\": " << inst.seed << ",\n";
    os << "  \"profile\": \"" << inst.profile << "\"\n";
    os << "}\n";
}

inline Instance read_instance_json(std::istream& is) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("instance parse: ") + e.what());
    }
    Instance inst;
    const int dim = j.at("dimension").get<int>();
    if (dim < 2) throw Error(ErrorCode::IoError, "instance dimension must be >= 2");
    if (j.at("tau").get<std::string>() != "2t")
        throw Error(ErrorCode::IoError, "unsupported tau field (expected \"2t\")");
    inst.model = std::make_shared<MinkowskiModel>(dim - 1);
    inst.spatial_dim = dim - 1;
    auto read_measure = [&](const nlohmann::json& node) {
        std::vector<Event> pts;
        for (const auto& arr : node.at("points")) {
            Vec c(dim);
            if (static_cast<int>(arr.size()) != dim)
                throw Error(ErrorCode::IoError, "point length does not match dimension");
            for (int a = 0; a < dim; ++a) c[a] = arr[static_cast<std::size_t>(a)].get<double>();
            pts.push_back(Event(c));
        }
        std::vector<double> ws = node.at("weights").get<std::vector<double>>();
        return DiscreteMeasure::create(std::move(pts), std::move(ws));
    };
    inst.mu = read_measure(j.at("mu"));
    inst.nu = read_measure(j.at("nu"));
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.profile = j.at("profile").get<std::string>();
    return inst;
}

inline void write_plan_json(const SolveResult& res, std::ostream& os) {
    os << "{\n";
    os << "  \"cost\": " << fmt_g17(res.total_cost.value()) << ",\n";
    os << "  \"plan\": [";
    for (std::size_t k = 0; k < res.coupling.plan.size(); ++k) {
        const PlanEntry& e = res.coupling.plan[k];
        if (k) os << ",";
        os << "[" << e.i << "," << e.j << "," << fmt_g17(e.mass) << "]";
    }
    os << "],\n";
    os << "  \"dual_u\": ";
    detail::write_weights(os, res.dual_u);
    os << ",\n";
    os << "  \"dual_v\": ";
    detail::write_weights(os, res.dual_v);
    os << ",\n";
    os << "  \"stats\": {\"augmentations\": " << res.stats.augmentations
       << ", \"purification_moves\": " << res.stats.purification_moves << "}\n";
    os << "}\n";
}

/// Rebuilds a solve result from plan.json against the given measures. The
/// stored cost is recomputed downstream when needed.
inline SolveResult read_plan_json(std::istream& is, const DiscreteMeasure& mu,
                                  const DiscreteMeasure& nu) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("plan parse: ") + e.what());
    }
    SolveResult res;
    res.coupling.source = mu;
    res.coupling.target = nu;
    for (const auto& t : j.at("plan")) {
        if (t.size() != 3) throw Error(ErrorCode::IoError, "plan triple must have 3 entries");
        PlanEntry e;
        e.i = t[0].get<int>();
        e.j = t[1].get<int>();
        e.mass = t[2].get<double>();
        if (e.i < 0 || e.i >= mu.size() || e.j < 0 || e.j >= nu.size())
            throw Error(ErrorCode::IoError, "plan index out of range");
        res.coupling.plan.push_back(e);
    }
    res.total_cost = ExtendedCost::finite(std::max(j.at("cost").get<double>(), 0.0));
    res.dual_u = j.at("dual_u").get<std::vector<double>>();
    res.dual_v = j.at("dual_v").get<std::vector<double>>();
    return res;
}

/// CSV with one row per potential value; infinite values use +inf/-inf
/// literals.
inline void write_potentials_csv(const PotentialPair& pp, std::ostream& os) {
    os << "side,index,value\n";
    auto cell = [](const ExtReal& v) -> std::string {
        if (v.is_plus_inf()) return "+inf";
        if (v.is_minus_inf()) return "-inf";
        return csv_g17(v.value());
    };
    for (std::size_t i = 0; i < pp.phi.size(); ++i)
        os << "phi," << i << "," << cell(pp.phi[i]) << "\n";
    for (std::size_t j = 0; j < pp.psi.size(); ++j)
        os << "psi," << j << "," << cell(pp.psi[j]) << "\n";
}

inline void write_map_csv(const TransportMap& tm, std::ostream& os) {
    os << "source_index,target_index,residual,separation,status\n";
    for (const MapEntry& e : tm.entries) {
        os << e.source_index << "," << e.target_index << ","
           << (e.residual >= 0.0 ? csv_g17(e.residual) : std::string("")) << ","
           << csv_g17(e.separation) << "," << to_string(e.status) << "\n";
    }
}

inline void write_regularity_json(const RegularityReport& rep, std::ostream& os) {
    os << "{\n";
    os << "  \"region_lo\": [";
    for (int a = 0; a < rep.region.dim(); ++a) {
        if (a) os << ",";
        os << fmt_g17(rep.region.lo[a]);
    }
    os << "],\n  \"region_hi\": [";
    for (int a = 0; a < rep.region.dim(); ++a) {
        if (a) os << ",";
        os << fmt_g17(rep.region.hi[a]);
    }
    os << "],\n";
    os << "  \"grid_nodes\": " << rep.grid_nodes << ",\n";
    os << "  \"phi_min\": " << fmt_g17(rep.phi_min) << ",\n";
    os << "  \"phi_max\": " << fmt_g17(rep.phi_max) << ",\n";
    os << "  \"semiconvexity_c\": " << fmt_g17(rep.semiconvexity_c) << ",\n";
    os << "  \"semiconvexity_c_half_grid\": " << fmt_g17(rep.semiconvexity_c_half_grid) << ",\n";
    os << "  \"timelike_delta\": " << fmt_g17(rep.timelike_delta) << ",\n";
    os << "  \"near_optimal_diameter\": " << fmt_g17(rep.near_optimal_diameter) << ",\n";
    os << "  \"light_cone_min_margin\": " << fmt_g17(rep.light_cone_min_margin) << ",\n";
    os << "  \"light_cone_all_positive\": " << (rep.light_cone_all_positive ? "true" : "false") << ",\n";
    os << "  \"supports_disjoint\": " << (rep.supports_disjoint ? "true" : "false") << ",\n";
    os << "  \"separation_checked\": " << (rep.separation_checked ? "true" : "false") << "\n";
    os << "}\n";
}

}  // namespace lorot
