#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "laminate_forge/errors.hpp"

namespace lamf {

/// Rolling evaluation of the two constant families. Values overflow any
/// fixed-width float for large c_tilde, so everything is archived as
/// natural logs: log_m[j] = log M_j and log_c2_max[j] = log max_i C2[j][i]
/// for j = 1..j_max (index 0 unused), plus the full rows of the final
/// stage, indexed 1..j_max with [0] = -inf standing in for C2[j][0] = 0.
struct ConstantsTrace {
    double epsilon_prime;
    double c_tilde;
    std::size_t n;
    long long j_max;
    std::vector<double> log_m;
    std::vector<double> log_c2_max;
    std::vector<double> final_log_c1;
    std::vector<double> final_log_c2;
};

namespace detail_constants {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(e^a + e^b), stable, with -inf as the additive zero.
inline double lse(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace detail_constants

/// Runs the constant recursion: rows start at C1[1][1] = C2[1][1] = 4^n;
/// each step adds j^-2 c~ M_j and the shifted C2 feedback to C1, spawns
/// the fresh diagonal c~ (M_j + C2[j][j]) j^-eps', and advances C2 by
/// C2[j][i-1] (1 + c~ i^-2) + c~ M_j i^(-2+eps') with its own diagonal.
inline ConstantsTrace constants_run(double epsilon_prime, double c_tilde,
                                    std::size_t n, long long j_max) {
    if (!(epsilon_prime > 0.0) || !(c_tilde > 1.0) || n < 3 || j_max < 1) {
        throw InvalidParams("constants_run needs eps' > 0, c~ > 1, n >= 3, "
                            "j_max >= 1");
    }
    using detail_constants::kNegInf;
    using detail_constants::lse;
    const double lc = std::log(c_tilde);

    std::vector<double> c1{kNegInf, static_cast<double>(n) * std::log(4.0)};
    std::vector<double> c2 = c1;
    ConstantsTrace trace{epsilon_prime, c_tilde, n, j_max,
                         std::vector<double>(j_max + 1, kNegInf),
                         std::vector<double>(j_max + 1, kNegInf),
                         {},
                         {}};

    for (long long j = 1;; ++j) {
        trace.log_m[j] = *std::max_element(c1.begin() + 1, c1.end());
        trace.log_c2_max[j] = *std::max_element(c2.begin() + 1, c2.end());
        if (j == j_max) break;

        const double lm = trace.log_m[j];
        const double lj = std::log(static_cast<double>(j));
        std::vector<double> next1(j + 2), next2(j + 2);
        next1[0] = next2[0] = kNegInf;
        const double spread = lc + lm - 2.0 * lj;
        for (long long i = 1; i <= j; ++i) {
            double gap = static_cast<double>(j + 2 - i);
            next1[i] = lse(c1[i],
                           lse(spread, lc + c2[i - 1] - 2.0 * std::log(gap)));
            next2[i] = lse(c2[i - 1] +
                               std::log1p(c_tilde / static_cast<double>(i * i)),
                           lc + lm +
                               (epsilon_prime - 2.0) *
                                   std::log(static_cast<double>(i)));
        }
        next1[j + 1] = lc + lse(lm, c2[j]) - epsilon_prime * lj;
        next2[j + 1] = lse(c2[j] +
                               std::log1p(c_tilde / static_cast<double>(j * j)),
                           lc + lm - 4.0 * lj);
        c1 = std::move(next1);
        c2 = std::move(next2);
    }
    trace.final_log_c1 = std::move(c1);
    trace.final_log_c2 = std::move(c2);
    return trace;
}

/// Boundedness verdict for one run. The suprema are reported both as
/// plain doubles (inf once past the double range) and as log10 values.
struct BoundednessReport {
    double m_sup_estimate;
    double c2_sup_estimate;
    double m_sup_log10;
    double c2_sup_log10;
    bool plateaued;
    std::string reason;
};

/// Plateau test: every relative step increment of M_j and of
/// max_i C2[j][i] over the last half of the run must stay below 1e-6.
/// Runs shorter than 10 stages report plateaued = false with a reason.
inline BoundednessReport detect_bounded(const ConstantsTrace& trace) {
    constexpr double kRelTol = 1e-6;
    const long long j_max = trace.j_max;
    BoundednessReport report{std::exp(trace.log_m[j_max]),
                             std::exp(trace.log_c2_max[j_max]),
                             trace.log_m[j_max] / std::log(10.0),
                             trace.log_c2_max[j_max] / std::log(10.0),
                             false,
                             ""};
    if (j_max < 10) {
        report.reason = "InsufficientLength";
        return report;
    }
    double worst = 0.0;
    for (long long j = j_max / 2 + 1; j <= j_max; ++j) {
        worst = std::max(worst,
                         std::expm1(trace.log_m[j] - trace.log_m[j - 1]));
        worst = std::max(
            worst, std::expm1(trace.log_c2_max[j] - trace.log_c2_max[j - 1]));
    }
    report.plateaued = worst < kRelTol;
    if (!report.plateaued) {
        report.reason = "TailIncrementAboveTolerance";
    }
    return report;
}

/// Renders a natural-log value as a decimal scientific literal, e.g.
/// "1.698244e+113695", staying exact-width far beyond double range.
inline std::string log_to_scientific(double log_value) {
    if (log_value == detail_constants::kNegInf) return "0";
    double l10 = log_value / std::log(10.0);
    double exponent = std::floor(l10);
    double mantissa = std::pow(10.0, l10 - exponent);
    if (mantissa >= 9.9999995) {
        mantissa = 1.0;
        exponent += 1.0;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6fe%+lld", mantissa,
                  static_cast<long long>(exponent));
    return buf;
}

/// CSV rows j, M_j, max_i C2[j][i] for the whole run.
inline void constants_csv(const ConstantsTrace& trace, std::ostream& out) {
    out << "j,m,c2max\n";
    for (long long j = 1; j <= trace.j_max; ++j) {
        out << j << ',' << log_to_scientific(trace.log_m[j]) << ','
            << log_to_scientific(trace.log_c2_max[j]) << '\n';
    }
}

}  // namespace lamf
