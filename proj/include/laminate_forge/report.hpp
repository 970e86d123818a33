#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "laminate_forge/analysis.hpp"
#include "laminate_forge/json_io.hpp"
#include "laminate_forge/laminate.hpp"
#include "laminate_forge/spectral_sets.hpp"

namespace lamf {

namespace detail_report {

inline std::vector<double> default_thresholds(long long stage) {
    std::vector<double> ts;
    for (long long t = 2; t <= stage; ++t) {
        ts.push_back(static_cast<double>(t));
    }
    return ts;
}

inline json tail_to_json(const TailTable& table) {
    json rows = json::array();
    for (std::size_t i = 0; i < table.thresholds.size(); ++i) {
        rows.push_back(json{{"t", table.thresholds[i]},
                            {"mass_p_over_q", table.masses_exact[i].str()},
                            {"mass_float", table.masses[i]}});
    }
    return rows;
}

inline json fit_to_json(const TailTable& table, long long stage) {
    try {
        const ExponentFit fit = fit_exponent(table, 2.0,
                                             static_cast<double>(stage));
        return json{{"slope", fit.slope},
                    {"intercept", fit.intercept},
                    {"r2", fit.r2},
                    {"t_min", fit.t_min},
                    {"t_max", fit.t_max}};
    } catch (const InsufficientPoints&) {
        return json{{"error", "InsufficientPoints"}};
    }
}

}  // namespace detail_report

/// One stage rendered as a deterministic JSON document: exact set masses,
/// operator-norm tails of the measure and its inverse on the integer grid
/// 2..stage, log-log fits over that grid, and the rank-degeneracy masses.
inline json stage_report(const Laminate& nu, long long stage,
                         const Params& params, Mode mode,
                         std::uint64_t seed = 0) {
    const MassProfile profile = mass_profile(nu, stage, params, mode);
    const std::vector<double> ts = detail_report::default_thresholds(stage);
    const TailTable fwd = tail(nu, ts);
    const TailTable inv = tail_inverse(nu, ts);
    const DegeneracyProfile degen =
        degeneracy_profile(nu, params, {0.25, 0.5});

    json masses = json::array();
    for (const auto& [id, mass] : profile.masses) {
        masses.push_back(json{{"set", id.str()},
                              {"mass_p_over_q", mass.str()},
                              {"mass_float", mass.to_double()}});
    }
    json degeneracy{{"smallest_below", json::array()},
                    {"largest_above", json::array()}};
    for (const auto& [theta, mass] : degen.mass_smallest_below) {
        degeneracy["smallest_below"].push_back(
            json{{"theta", theta}, {"mass_p_over_q", mass.str()}});
    }
    for (const auto& [theta, mass] : degen.mass_largest_above) {
        degeneracy["largest_above"].push_back(
            json{{"theta", theta}, {"mass_p_over_q", mass.str()}});
    }
    return json{{"stage", stage},
                {"seed", seed},
                {"params", json{{"n", params.n},
                                {"m1", params.m1},
                                {"m2", params.m2}}},
                {"mode", mode == Mode::Exact3D ? "exact-3d" : "open-nd"},
                {"atom_count", nu.atoms().size()},
                {"masses", masses},
                {"unclassified_p_over_q", profile.unclassified.str()},
                {"tail", detail_report::tail_to_json(fwd)},
                {"tail_inverse", detail_report::tail_to_json(inv)},
                {"fits", json{{"tail", detail_report::fit_to_json(fwd, stage)},
                              {"tail_inverse",
                               detail_report::fit_to_json(inv, stage)}}},
                {"degeneracy", degeneracy}};
}

/// Flat CSV mirror of stage_report for plotting: one row per datum,
/// keyed by kind.
inline void stage_report_csv(const json& report, std::ostream& out) {
    out << "kind,key,value\n";
    for (const auto& row : report["masses"]) {
        out << "mass," << row["set"].get<std::string>() << ','
            << row["mass_float"].get<double>() << '\n';
    }
    for (const char* kind : {"tail", "tail_inverse"}) {
        for (const auto& row : report[kind]) {
            out << kind << ',' << row["t"].get<double>() << ','
                << row["mass_float"].get<double>() << '\n';
        }
        const json& fit = report["fits"][kind];
        if (fit.contains("slope")) {
            out << kind << "_slope,," << fit["slope"].get<double>() << '\n';
        }
    }
    return;
}

}  // namespace lamf
