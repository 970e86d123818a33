#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "laminate_forge/diag_matrix.hpp"
#include "laminate_forge/errors.hpp"
#include "laminate_forge/laminate.hpp"
#include "laminate_forge/rational.hpp"
#include "laminate_forge/spectral_sets.hpp"

namespace lamf {

/// Exact stage masses keyed by set, with whatever fails to classify
/// accumulated separately (zero for every constructed stage).
struct MassProfile {
    std::map<SpectralSetId, Rational> masses;
    Rational unclassified;
};

inline MassProfile mass_profile(const Laminate& nu, long long stage,
                                const Params& params, Mode mode) {
    MassProfile profile{{}, Rational(0)};
    for (const auto& atom : nu.atoms()) {
        auto cls = classify(atom.matrix, stage, params, mode);
        if (cls) {
            profile.masses[*cls] += atom.weight;
        } else {
            profile.unclassified += atom.weight;
        }
    }
    return profile;
}

/// Survival function of the operator norm, sampled on an ascending
/// threshold grid. Masses are exact and nonincreasing; the float column
/// is for fitting and reports.
struct TailTable {
    std::vector<double> thresholds;
    std::vector<Rational> masses_exact;
    std::vector<double> masses;
};

inline TailTable tail(const Laminate& nu, const std::vector<double>& thresholds) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        if (!(thresholds[t] > 0.0) ||
            (t > 0 && !(thresholds[t] > thresholds[t - 1]))) {
            throw InvalidParams("tail thresholds must be ascending positive");
        }
    }
    TailTable table{thresholds, {}, {}};
    for (double t : thresholds) {
        const Rational bar = Rational::from_double_exact(t);
        Rational mass(0);
        for (const auto& atom : nu.atoms()) {
            if (op_norm(atom.matrix) > bar) mass += atom.weight;
        }
        table.masses_exact.push_back(mass);
        table.masses.push_back(mass.to_double());
    }
    return table;
}

inline TailTable tail_inverse(const Laminate& nu,
                              const std::vector<double>& thresholds) {
    return tail(inverse_laminate(nu), thresholds);
}

/// Least-squares line through (log t, log mass).
struct ExponentFit {
    double slope;
    double intercept;
    double r2;
    double t_min;
    double t_max;
};

/// Fits over the strictly positive masses with t in [t_min, t_max];
/// fewer than three such points is an error, not an extrapolation.
inline ExponentFit fit_exponent(const TailTable& table, double t_min,
                                double t_max) {
    std::vector<double> xs, ys;
    for (std::size_t idx = 0; idx < table.thresholds.size(); ++idx) {
        const double t = table.thresholds[idx];
        if (t < t_min || t > t_max) continue;
        if (!(table.masses[idx] > 0.0)) continue;
        xs.push_back(std::log(t));
        ys.push_back(std::log(table.masses[idx]));
    }
    const std::size_t count = xs.size();
    if (count < 3) {
        throw InsufficientPoints("fit_exponent needs >= 3 positive points, "
                                 "got " + std::to_string(count));
    }
    double sx = 0, sy = 0;
    for (std::size_t idx = 0; idx < count; ++idx) {
        sx += xs[idx];
        sy += ys[idx];
    }
    const double mx = sx / count, my = sy / count;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t idx = 0; idx < count; ++idx) {
        sxx += (xs[idx] - mx) * (xs[idx] - mx);
        sxy += (xs[idx] - mx) * (ys[idx] - my);
        syy += (ys[idx] - my) * (ys[idx] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double r2 = 1.0;
    if (syy > 0.0) {
        double ss_res = 0;
        for (std::size_t idx = 0; idx < count; ++idx) {
            const double resid = ys[idx] - (intercept + slope * xs[idx]);
            ss_res += resid * resid;
        }
        r2 = 1.0 - ss_res / syy;
    }
    return ExponentFit{slope, intercept, r2, t_min, t_max};
}

/// Image-volume fraction of each atom: weight times determinant, the
/// unnormalized inverse-laminate weights. Sums to det_expectation(nu).
inline std::map<DiagMatrix, Rational> pushforward_volume(const Laminate& nu) {
    std::map<DiagMatrix, Rational> volumes;
    for (const auto& atom : nu.atoms()) {
        volumes[atom.matrix] += atom.weight * det(atom.matrix);
    }
    return volumes;
}

/// Mass near rank degeneracy: for each theta < 1, how much of the
/// measure has its smallest entry below theta and how much has its
/// largest entry above the reciprocal 1/theta. Each map is keyed by the
/// literal threshold it compares against.
struct DegeneracyProfile {
    std::map<double, Rational> mass_smallest_below;
    std::map<double, Rational> mass_largest_above;
};

inline DegeneracyProfile degeneracy_profile(
    const Laminate& nu, const Params& params,
    const std::vector<double>& thresholds) {
    DegeneracyProfile profile;
    for (double theta : thresholds) {
        if (!(theta > 0.0) || !(theta < 1.0)) {
            throw InvalidParams("degeneracy thresholds must lie in (0,1)");
        }
        const Rational low_bar = Rational::from_double_exact(theta);
        const Rational high_bar = Rational(1) / low_bar;
        Rational below(0), above(0);
        for (const auto& atom : nu.atoms()) {
            if (atom.matrix.dim() != params.n) {
                throw DimensionMismatch("degeneracy_profile: atom dimension "
                                        "disagrees with params");
            }
            const std::vector<Rational> spectrum =
                sorted_spectrum(atom.matrix);
            if (spectrum.front() < low_bar) below += atom.weight;
            if (spectrum.back() > high_bar) above += atom.weight;
        }
        profile.mass_smallest_below[theta] = below;
        profile.mass_largest_above[high_bar.to_double()] = above;
    }
    return profile;
}

}  // namespace lamf
