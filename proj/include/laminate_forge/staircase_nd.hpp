#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "laminate_forge/laminate.hpp"
#include "laminate_forge/spectral_sets.hpp"

namespace lamf {

/// Per-node bookkeeping of one open-band split tree. The first triple
/// counts small positions (untouched / dropped / raised), the second the
/// tracked large positions; `untracked` are large entries that already sit
/// in the upper quarter band and never split.
struct SplitCounters {
    std::size_t beta1 = 0, beta2 = 0, beta3 = 0;
    std::size_t gamma1 = 0, gamma2 = 0, gamma3 = 0;
    std::size_t untracked = 0;
};

namespace detailnd {

using detail::in_A_large_band;
using detail::in_B_large_band;
using detail::in_small_band;
using detail::in_wide_band;

struct PositionClasses {
    std::vector<std::size_t> smalls;  // 0-based positions
    std::vector<std::size_t> mids;    // tracked larges
    std::vector<std::size_t> highs;   // untracked larges (> i + 3/4)
};

inline bool in_mid_band(const Rational& v, long long i) {
    return Rational(4 * i - 1, 4) < v && v <= Rational(4 * i + 3, 4);
}

/// Assigns positions of an A-family member to small / tracked-large /
/// untracked-large slots. Entries inside both bands (possible at k=0,
/// where the bands overlap) fill the small quota first, left to right.
inline PositionClasses classify_positions_A(const DiagMatrix& A, long long k,
                                            long long i, const Params& p) {
    PositionClasses out;
    std::vector<std::size_t> ambiguous;
    for (std::size_t q = 0; q < p.n; ++q) {
        bool s = in_small_band(A[q], k + 1);
        bool l = in_A_large_band(A[q], i);
        if (s && l) {
            ambiguous.push_back(q);
        } else if (s) {
            out.smalls.push_back(q);
        } else if (l) {
            out.mids.push_back(q);
        } else {
            throw MembershipViolation("entry " + A[q].str() +
                                      " fits no band of A[k=" +
                                      std::to_string(k) + ",i=" +
                                      std::to_string(i) + "]");
        }
    }
    for (std::size_t q : ambiguous) {
        if (out.smalls.size() < p.n - p.m1) {
            out.smalls.push_back(q);
        } else {
            out.mids.push_back(q);
        }
    }
    std::sort(out.smalls.begin(), out.smalls.end());
    std::sort(out.mids.begin(), out.mids.end());
    if (out.smalls.size() != p.n - p.m1 || out.mids.size() != p.m1) {
        throw MembershipViolation("band counts of " + A.str() +
                                  " do not fit A[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) + "]");
    }
    // entries above i + 3/4 are already in place and never split
    std::vector<std::size_t> tracked;
    for (std::size_t q : out.mids) {
        if (A[q] > Rational(4 * i + 3, 4)) {
            out.highs.push_back(q);
        } else {
            tracked.push_back(q);
        }
    }
    out.mids = std::move(tracked);
    return out;
}

inline SplitCounters counters_A(const DiagMatrix& m, long long k, long long i,
                                const PositionClasses& pc) {
    SplitCounters c;
    c.untracked = pc.highs.size();
    for (std::size_t q : pc.smalls) {
        if (in_small_band(m[q], k + 1)) {
            ++c.beta1;
        } else if (in_small_band(m[q], k + 2)) {
            ++c.beta2;
        } else if (in_B_large_band(m[q], i)) {
            ++c.beta3;
        } else {
            throw CounterViolation("small entry " + m[q].str() +
                                   " left the split bands");
        }
    }
    for (std::size_t q : pc.mids) {
        if (in_mid_band(m[q], i)) {
            ++c.gamma1;
        } else if (in_small_band(m[q], k + 2)) {
            ++c.gamma2;
        } else if (in_B_large_band(m[q], i)) {
            ++c.gamma3;
        } else {
            throw CounterViolation("large entry " + m[q].str() +
                                   " left the split bands");
        }
    }
    return c;
}

enum class NodeState { NotTerminal, TerminalA, TerminalB, TerminalS };

inline NodeState node_state_A(const SplitCounters& c, const Params& p) {
    const std::size_t n = p.n, m1 = p.m1, m2 = p.m2;
    if (c.beta1 + c.beta2 + c.gamma2 > n - m1 ||
        c.beta3 + c.gamma1 + c.gamma3 > n - m2 - c.untracked) {
        throw CounterViolation("split counters exceed their quotas");
    }
    if (c.beta2 + c.gamma2 == n - m1) return NodeState::TerminalA;
    if (c.beta3 + c.gamma3 == n - m2 - c.untracked) {
        return NodeState::TerminalB;
    }
    if (c.beta1 + c.gamma1 == 0) return NodeState::TerminalS;
    return NodeState::NotTerminal;
}

}  // namespace detailnd

// forward declarations: the frozen-regime wrappers reduce, split and expand
inline SplitCertificate split_A_nd(const DiagMatrix& A, long long k,
                                   long long i, const Params& params);
inline SplitCertificate split_B_nd(const DiagMatrix& A, long long k,
                                   long long i, const Params& params);

/// An m1+m2 >= n member with its frozen middle entries removed. The
/// reduced matrix lives in dimension n' = 2n-m1-m2-1 with effective target
/// ranks m1', m2'; kept_positions maps reduced slots back to originals.
struct FrozenReduction {
    DiagMatrix original;
    DiagMatrix reduced;
    Params reduced_params;
    std::vector<std::size_t> kept_positions;
    std::vector<std::size_t> frozen_positions;
    std::vector<Rational> frozen_values;
};

/// Removes the frozen block of a case m1+m2 >= n member. The block sits at
/// fixed sorted ranks: for the A layout ranks n-m1..m2 (0-based), for the
/// B layout ranks n-m1-1..m2-1. Requires the reduction to be a case-1
/// member of the same family and indices.
inline FrozenReduction reduce_freeze(const DiagMatrix& A, const Params& params,
                                     SetFamily family, long long k,
                                     long long i) {
    if (!params.case_two()) {
        throw UnsupportedRegime("reduce_freeze needs m1+m2 >= n");
    }
    if (family == SetFamily::S) {
        throw InvalidParams("S sets are empty in the frozen regime");
    }
    if (!member(A, family == SetFamily::A ? set_A(k, i, Mode::OpenND, params)
                                          : set_B(k, i, Mode::OpenND, params))) {
        throw MembershipViolation("reduce_freeze input " + A.str() +
                                  " is not a frozen-regime member");
    }
    const std::size_t n = params.n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x,
                                                     std::size_t y) {
        return A[x] < A[y];
    });
    std::size_t lo = family == SetFamily::A ? n - params.m1 : n - params.m1 - 1;
    std::size_t hi = lo + params.frozen_count();  // exclusive
    std::vector<std::size_t> frozen(order.begin() + lo, order.begin() + hi);
    std::sort(frozen.begin(), frozen.end());
    std::vector<std::size_t> kept;
    std::vector<Rational> kept_values, frozen_values;
    for (std::size_t q = 0; q < n; ++q) {
        if (std::find(frozen.begin(), frozen.end(), q) != frozen.end()) {
            frozen_values.push_back(A[q]);
        } else {
            kept.push_back(q);
            kept_values.push_back(A[q]);
        }
    }
    Params reduced_params(params.n_eff(), params.m1_eff(), params.m2_eff());
    DiagMatrix reduced(kept_values);
    auto reduced_id = family == SetFamily::A
                          ? set_A(k, i, Mode::OpenND, reduced_params)
                          : set_B(k, i, Mode::OpenND, reduced_params);
    if (!member(reduced, reduced_id)) {
        throw MembershipViolation("reduction of " + A.str() +
                                  " misses " + reduced_id.str());
    }
    return FrozenReduction{A,    reduced,       reduced_params,
                           kept, std::move(frozen), std::move(frozen_values)};
}

/// reduce_freeze that finds (family, k, i) itself by scanning the small
/// index ranges compatible with the extreme entries.
inline FrozenReduction reduce_freeze(const DiagMatrix& A,
                                     const Params& params) {
    if (!params.case_two()) {
        throw UnsupportedRegime("reduce_freeze needs m1+m2 >= n");
    }
    std::vector<Rational> v = sorted_spectrum(A);
    long long k_hint = static_cast<long long>(1.0 / v.front().to_double());
    long long i_hint = static_cast<long long>(v.back().to_double());
    std::vector<SpectralSetId> hits;
    for (long long k = std::max<long long>(0, k_hint - 2); k <= k_hint + 2;
         ++k) {
        for (long long i = std::max<long long>(1, i_hint - 2);
             i <= i_hint + 2; ++i) {
            if (k >= 0 && member(A, set_A(k, i, Mode::OpenND, params))) {
                hits.push_back(set_A(k, i, Mode::OpenND, params));
            }
            if (k >= 1 && member(A, set_B(k, i, Mode::OpenND, params))) {
                hits.push_back(set_B(k, i, Mode::OpenND, params));
            }
        }
    }
    if (hits.empty()) {
        throw MembershipViolation(A.str() +
                                  " is not in any frozen-regime set");
    }
    // keep the largest index inside each family, then demand one family
    std::vector<SpectralSetId> best;
    for (const auto& h : hits) {
        bool dominated = false;
        for (const auto& o : hits) {
            if (o.family != h.family || o == h) continue;
            if ((h.family == SetFamily::A && o.i > h.i) ||
                (h.family == SetFamily::B && o.k > h.k)) {
                dominated = true;
            }
        }
        if (!dominated) best.push_back(h);
    }
    if (best.size() > 1) {
        throw AmbiguousMembership("frozen-regime membership of " + A.str() +
                                  " is not unique");
    }
    return reduce_freeze(A, params, best.front().family, best.front().k,
                         best.front().i);
}

/// Replays a certificate built on the reduced matrix as a certificate on
/// the original: split positions are remapped through kept_positions.
inline SplitCertificate expand_frozen(const SplitCertificate& cert,
                                      const FrozenReduction& red) {
    if (cert.root != red.reduced) {
        throw RootMismatch("certificate root " + cert.root.str() +
                           " is not the reduction " + red.reduced.str());
    }
    SplitCertificate out{red.original, {}};
    for (const auto& s : cert.steps) {
        SplitStep t = s;
        t.position = red.kept_positions.at(s.position - 1) + 1;
        out.steps.push_back(t);
    }
    return out;
}

/// Re-inserts the frozen entries into every atom of a reduced laminate.
inline Laminate expand_frozen(const Laminate& nu, const FrozenReduction& red) {
    std::vector<Atom> atoms;
    atoms.reserve(nu.size());
    for (const auto& a : nu.atoms()) {
        std::vector<Rational> entries(red.original.dim(), Rational(0));
        for (std::size_t q = 0; q < red.kept_positions.size(); ++q) {
            entries[red.kept_positions[q]] = a.matrix[q];
        }
        for (std::size_t q = 0; q < red.frozen_positions.size(); ++q) {
            entries[red.frozen_positions[q]] = red.frozen_values[q];
        }
        atoms.push_back(Atom{a.weight, DiagMatrix(entries)});
    }
    return Laminate(std::move(atoms));
}

/// Refines an A_k^i member into A_{k+1}^i, B_{k+1}^i and the S_{k+1,i}^a
/// bands: small entries split into 1/(k+2) and i+1 (smallest position
/// first) while the raised quota is open; afterwards tracked large entries
/// split the same way. Terminal nodes are detected from the counters and
/// cross-checked against set membership. Atom 0 of the replay is the
/// leading atom M1 (all smalls dropped, larges kept). In the frozen
/// regime the middle entries are frozen out first and re-inserted.
inline SplitCertificate split_A_nd(const DiagMatrix& A, long long k,
                                   long long i, const Params& params) {
    if (params.case_two()) {
        FrozenReduction red = reduce_freeze(A, params, SetFamily::A, k, i);
        return expand_frozen(split_A_nd(red.reduced, k, i, red.reduced_params),
                             red);
    }
    if (k < 0 || i < 1) {
        throw InvalidParams("split_A_nd needs k >= 0, i >= 1");
    }
    if (!member(A, set_A(k, i, Mode::OpenND, params))) {
        throw MembershipViolation("split_A_nd input " + A.str() +
                                  " is not in A[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) + "]");
    }
    using namespace detailnd;
    PositionClasses pc = classify_positions_A(A, k, i, params);
    const Rational drop(1, k + 2);
    const Rational raise(i + 1);
    const Rational small_cap =
        Rational(2) / (Rational(i) * Rational((k + 1) * (k + 1)));
    const Rational mid_cap = Rational(2) / Rational(i);

    CertificateBuilder b(A);
    for (std::size_t idx = 0; idx < b.atoms().size();) {
        const Atom& atom = b.atoms()[idx];
        SplitCounters c = counters_A(atom.matrix, k, i, pc);
        NodeState st = node_state_A(c, params);
        if (st != NodeState::NotTerminal) {
            // counters and membership must tell the same story
            bool ok = false;
            if (st == NodeState::TerminalA) {
                ok = member(atom.matrix,
                            set_A(k + 1, i, Mode::OpenND, params));
            } else if (st == NodeState::TerminalB) {
                ok = member(atom.matrix,
                            set_B(k + 1, i, Mode::OpenND, params));
            } else {
                long long a = static_cast<long long>(c.beta2 + c.gamma2);
                ok = params.s_sets_exist() &&
                     member(atom.matrix, set_S(k + 1, i, a, params));
            }
            if (!ok) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            ++idx;
            continue;
        }
        // node weight obeys the per-path product bound
        Rational cap = pow(small_cap, c.beta3) * pow(mid_cap, c.gamma2);
        if (atom.weight > cap) {
            throw CounterViolation("path weight " + atom.weight.str() +
                                   " exceeds its bound " + cap.str());
        }
        bool split_small =
            c.beta1 > 0 &&
            c.beta3 + c.gamma1 + c.gamma3 < params.n - params.m2 - c.untracked;
        const std::vector<std::size_t>& pool = split_small ? pc.smalls
                                                           : pc.mids;
        if (!split_small && c.gamma1 == 0) {
            throw CounterViolation("no splittable entry left in " +
                                   atom.matrix.str());
        }
        std::size_t alpha = params.n;
        for (std::size_t q : pool) {
            bool eligible = split_small
                                ? in_small_band(atom.matrix[q], k + 1)
                                : in_mid_band(atom.matrix[q], i);
            if (eligible) {
                alpha = q;
                break;
            }
        }
        if (alpha == params.n) {
            throw CounterViolation("counters promised a splittable entry in " +
                                   atom.matrix.str());
        }
        Rational lambda =
            (raise - atom.matrix[alpha]) / (raise - drop);
        b.split(SplitStep{idx, alpha + 1, drop, raise, lambda});
    }
    return b.certificate();
}

namespace detailnd {

struct MirrorCounters {
    std::size_t d1 = 0, d2 = 0, d3 = 0;  // larges: kept / raised / dropped
    std::size_t e1 = 0, e2 = 0, e3 = 0;  // loose smalls: kept/raised/dropped
    std::size_t pinned = 0;              // smalls already in the tight band
};

}  // namespace detailnd

/// Mirror refinement of a B_k^i member into A_k^{i+1}, B_k^{i+1} and the
/// S_{k,i+1}^a bands: large entries sigma split into 1/(k+1) and sigma+1
/// while the dropped quota is open; afterwards the loose small entries
/// (inside the wide band but not the tight one) split into 1/(k+1) and
/// i+2. The all-raised branch is the leading atom M1.
inline SplitCertificate split_B_nd(const DiagMatrix& A, long long k,
                                   long long i, const Params& params) {
    if (params.case_two()) {
        FrozenReduction red = reduce_freeze(A, params, SetFamily::B, k, i);
        return expand_frozen(split_B_nd(red.reduced, k, i, red.reduced_params),
                             red);
    }
    if (k < 1 || i < 1) {
        throw InvalidParams("split_B_nd needs k >= 1, i >= 1");
    }
    if (!member(A, set_B(k, i, Mode::OpenND, params))) {
        throw MembershipViolation("split_B_nd input " + A.str() +
                                  " is not in B[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) + "]");
    }
    using namespace detailnd;
    const std::size_t n = params.n, m1 = params.m1, m2 = params.m2;
    std::vector<std::size_t> small_pos, large_pos;
    for (std::size_t q = 0; q < n; ++q) {
        if (in_wide_band(A[q], k)) {
            small_pos.push_back(q);
        } else if (in_B_large_band(A[q], i)) {
            large_pos.push_back(q);
        } else {
            throw MembershipViolation("entry " + A[q].str() +
                                      " fits no band of B[k=" +
                                      std::to_string(k) + ",i=" +
                                      std::to_string(i) + "]");
        }
    }
    if (small_pos.size() != m2 || large_pos.size() != n - m2) {
        throw MembershipViolation("band counts of " + A.str() +
                                  " do not fit B[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) + "]");
    }
    const Rational drop(1, k + 1);

    auto counters = [&](const DiagMatrix& m) {
        MirrorCounters c;
        for (std::size_t q : large_pos) {
            if (in_B_large_band(m[q], i)) {
                ++c.d1;
            } else if (in_B_large_band(m[q], i + 1)) {
                ++c.d2;
            } else if (in_small_band(m[q], k + 1)) {
                ++c.d3;
            } else {
                throw CounterViolation("large entry " + m[q].str() +
                                       " left the split bands");
            }
        }
        for (std::size_t q : small_pos) {
            if (in_small_band(m[q], k + 1)) {
                // original tight-band smalls count as pinned, drops as e3
                if (in_small_band(A[q], k + 1)) {
                    ++c.pinned;
                } else {
                    ++c.e3;
                }
            } else if (in_B_large_band(m[q], i + 1)) {
                ++c.e2;
            } else if (in_wide_band(m[q], k)) {
                ++c.e1;
            } else {
                throw CounterViolation("small entry " + m[q].str() +
                                       " left the split bands");
            }
        }
        return c;
    };

    CertificateBuilder b(A);
    for (std::size_t idx = 0; idx < b.atoms().size();) {
        const Atom& atom = b.atoms()[idx];
        MirrorCounters c = counters(atom.matrix);
        if (c.d1 + c.d2 + c.e2 > n - m2 ||
            c.d3 + c.e1 + c.e3 > n - m1 - c.pinned) {
            throw CounterViolation("split counters exceed their quotas");
        }
        bool terminal = false;
        if (c.d2 + c.e2 == n - m2) {
            if (!member(atom.matrix, set_B(k, i + 1, Mode::OpenND, params))) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            terminal = true;
        } else if (c.e1 == 0 && c.d3 + c.e3 + c.pinned == n - m1) {
            if (!member(atom.matrix, set_A(k, i + 1, Mode::OpenND, params))) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            terminal = true;
        } else if (c.e1 == 0 && c.d1 == 0) {
            long long a = static_cast<long long>(c.d3 + c.e3 + c.pinned);
            if (!params.s_sets_exist() ||
                !member(atom.matrix, set_S(k, i + 1, a, params))) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            terminal = true;
        }
        if (terminal) {
            ++idx;
            continue;
        }
        bool split_large =
            c.d1 > 0 && c.d3 + c.e1 + c.e3 < n - m1 - c.pinned;
        if (!split_large && c.e1 == 0) {
            throw CounterViolation("no splittable entry left in " +
                                   atom.matrix.str());
        }
        std::size_t alpha = n;
        if (split_large) {
            for (std::size_t q : large_pos) {
                if (in_B_large_band(atom.matrix[q], i)) {
                    alpha = q;
                    break;
                }
            }
        } else {
            for (std::size_t q : small_pos) {
                if (in_wide_band(atom.matrix[q], k) &&
                    !in_small_band(atom.matrix[q], k + 1)) {
                    alpha = q;
                    break;
                }
            }
        }
        if (alpha == n) {
            throw CounterViolation("counters promised a splittable entry in " +
                                   atom.matrix.str());
        }
        const Rational& v = atom.matrix[alpha];
        Rational high = split_large ? v + Rational(1) : Rational(i + 2);
        Rational lambda = (high - v) / (high - drop);
        b.split(SplitStep{idx, alpha + 1, drop, high, lambda});
    }
    return b.certificate();
}

/// Refinement of an S_{k,i}^{a0} member into A_{k+1}^{i+1}, B_{k+1}^{i+1}
/// and the S_{k+1,i+1}^a bands: both indices advance. Larges split into
/// 1/(k+2) and sigma+1 while the dropped quota is open, then the remaining
/// tight-band smalls split into 1/(k+2) and i+2.
inline SplitCertificate split_S_nd(const DiagMatrix& A, long long k,
                                   long long i, long long a0,
                                   const Params& params) {
    if (!params.s_sets_exist()) {
        throw UnsupportedRegime("S sets are empty unless m1+m2 < n-1");
    }
    if (!member(A, set_S(k, i, a0, params))) {
        throw MembershipViolation("split_S_nd input " + A.str() +
                                  " is not in S[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) +
                                  ",a=" + std::to_string(a0) + "]");
    }
    using namespace detailnd;
    const std::size_t n = params.n, m1 = params.m1, m2 = params.m2;
    std::vector<std::size_t> small_pos, large_pos;
    for (std::size_t q = 0; q < n; ++q) {
        if (in_small_band(A[q], k + 1)) {
            small_pos.push_back(q);
        } else {
            large_pos.push_back(q);
        }
    }
    const Rational drop(1, k + 2);

    struct Counts {
        std::size_t d1 = 0, d2 = 0, d3 = 0, e1 = 0, e2 = 0, e3 = 0;
    };
    auto counters = [&](const DiagMatrix& m) {
        Counts c;
        for (std::size_t q : large_pos) {
            if (in_B_large_band(m[q], i)) {
                ++c.d1;
            } else if (in_B_large_band(m[q], i + 1)) {
                ++c.d2;
            } else if (in_small_band(m[q], k + 2)) {
                ++c.d3;
            } else {
                throw CounterViolation("large entry " + m[q].str() +
                                       " left the split bands");
            }
        }
        for (std::size_t q : small_pos) {
            if (in_small_band(m[q], k + 1)) {
                ++c.e1;
            } else if (in_B_large_band(m[q], i + 1)) {
                ++c.e2;
            } else if (in_small_band(m[q], k + 2)) {
                ++c.e3;
            } else {
                throw CounterViolation("small entry " + m[q].str() +
                                       " left the split bands");
            }
        }
        return c;
    };

    CertificateBuilder b(A);
    for (std::size_t idx = 0; idx < b.atoms().size();) {
        const Atom& atom = b.atoms()[idx];
        Counts c = counters(atom.matrix);
        if (c.d1 + c.d2 + c.e2 > n - m2 || c.d3 + c.e1 + c.e3 > n - m1) {
            throw CounterViolation("split counters exceed their quotas");
        }
        bool terminal = false;
        if (c.d2 + c.e2 == n - m2) {
            if (!member(atom.matrix,
                        set_B(k + 1, i + 1, Mode::OpenND, params))) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            terminal = true;
        } else if (c.e1 == 0 && c.d3 + c.e3 == n - m1) {
            if (!member(atom.matrix,
                        set_A(k + 1, i + 1, Mode::OpenND, params))) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            terminal = true;
        } else if (c.e1 == 0 && c.d1 == 0) {
            long long a = static_cast<long long>(c.d3 + c.e3);
            if (!member(atom.matrix, set_S(k + 1, i + 1, a, params))) {
                throw CounterViolation("terminal leaf " + atom.matrix.str() +
                                       " disagrees with its counters");
            }
            terminal = true;
        }
        if (terminal) {
            ++idx;
            continue;
        }
        bool split_large = c.d1 > 0 && c.d3 + c.e1 + c.e3 < n - m1;
        if (!split_large && c.e1 == 0) {
            throw CounterViolation("no splittable entry left in " +
                                   atom.matrix.str());
        }
        std::size_t alpha = n;
        const std::vector<std::size_t>& pool = split_large ? large_pos
                                                           : small_pos;
        for (std::size_t q : pool) {
            bool eligible = split_large
                                ? in_B_large_band(atom.matrix[q], i)
                                : in_small_band(atom.matrix[q], k + 1);
            if (eligible) {
                alpha = q;
                break;
            }
        }
        if (alpha == n) {
            throw CounterViolation("counters promised a splittable entry in " +
                                   atom.matrix.str());
        }
        const Rational& v = atom.matrix[alpha];
        Rational high = split_large ? v + Rational(1) : Rational(i + 2);
        Rational lambda = (high - v) / (high - drop);
        b.split(SplitStep{idx, alpha + 1, drop, high, lambda});
    }
    return b.certificate();
}

namespace detailnd {

/// Splices one inner round into the certificate: every leaf inside
/// `target` is replaced by `refine(leaf)`.
template <typename Refine>
inline SplitCertificate refine_leaves(const SplitCertificate& cert,
                                      const SpectralSetId& target,
                                      Refine&& refine) {
    std::map<DiagMatrix, SplitCertificate> children;
    const Laminate leaves = replay(cert);
    for (const auto& leaf : leaves.atoms()) {
        if (member(leaf.matrix, target) && !children.count(leaf.matrix)) {
            children.emplace(leaf.matrix, refine(leaf.matrix));
        }
    }
    if (children.empty()) return cert;
    return splice(cert, children);
}

}  // namespace detailnd

/// Full stage push of an A_j^i member: one split_A_nd, then j-i+1 rounds
/// of split_B_nd walking the B superscripts up to j+1. Support lands in
/// the A_{j+1}^{i..j+1} sets, B_{j+1}^{j+1} and the S_{j+1,*}^a bands.
inline SplitCertificate push_A_row_nd(const DiagMatrix& A, long long i,
                                      long long j, const Params& params) {
    if (!(1 <= i && i <= j)) {
        throw InvalidParams("push_A_row_nd needs 1 <= i <= j");
    }
    SplitCertificate cert = split_A_nd(A, j, i, params);
    for (long long r = 0; r <= j - i; ++r) {
        cert = detailnd::refine_leaves(
            cert, set_B(j + 1, i + r, Mode::OpenND, params),
            [&](const DiagMatrix& m) {
                return split_B_nd(m, j + 1, i + r, params);
            });
    }
    return cert;
}

/// Full stage push of a B_i^j member: one split_B_nd, then j-i+1 rounds
/// of split_A_nd walking the A subscripts up to j+1. Support lands in
/// B_{i..j+1}^{j+1}, A_{j+1}^{j+1} and the S_{*,j+1}^a bands.
inline SplitCertificate push_B_row_nd(const DiagMatrix& A, long long i,
                                      long long j, const Params& params) {
    if (!(1 <= i && i <= j)) {
        throw InvalidParams("push_B_row_nd needs 1 <= i <= j");
    }
    SplitCertificate cert = split_B_nd(A, i, j, params);
    for (long long r = 0; r <= j - i; ++r) {
        cert = detailnd::refine_leaves(
            cert, set_A(i + r, j + 1, Mode::OpenND, params),
            [&](const DiagMatrix& m) {
                return split_A_nd(m, i + r, j + 1, params);
            });
    }
    return cert;
}

/// Full stage push of an S_{k0,i0}^{a0} member at stage j (so k0 = j or
/// i0 = j): one split_S_nd, then the fresh B (resp. A) strays walk to
/// index j+1 like the corresponding row pushes.
inline SplitCertificate push_S_row_nd(const DiagMatrix& A, long long k0,
                                      long long i0, long long a0, long long j,
                                      const Params& params) {
    if (k0 != j && i0 != j) {
        throw InvalidParams("push_S_row_nd needs k0 = j or i0 = j");
    }
    SplitCertificate cert = split_S_nd(A, k0, i0, a0, params);
    if (k0 == j) {
        // strays B_{j+1}^{i0+1} advance their superscript to j+1
        for (long long r = 0; r <= j - i0 - 1; ++r) {
            cert = detailnd::refine_leaves(
                cert, set_B(j + 1, i0 + 1 + r, Mode::OpenND, params),
                [&](const DiagMatrix& m) {
                    return split_B_nd(m, j + 1, i0 + 1 + r, params);
                });
        }
    } else {
        // strays A_{k0+1}^{j+1} advance their subscript to j+1
        for (long long r = 0; r <= j - k0 - 1; ++r) {
            cert = detailnd::refine_leaves(
                cert, set_A(k0 + 1 + r, j + 1, Mode::OpenND, params),
                [&](const DiagMatrix& m) {
                    return split_A_nd(m, k0 + 1 + r, j + 1, params);
                });
        }
    }
    return cert;
}

/// One stage of the open-band staircase.
struct StageMeasureND {
    long long j;
    Params params;
    Laminate nu;
    std::map<SpectralSetId, Rational> masses;
};

namespace detailnd {

inline std::map<SpectralSetId, Rational> stage_masses(const Laminate& nu,
                                                      long long j,
                                                      const Params& params) {
    std::map<SpectralSetId, Rational> masses;
    for (const auto& atom : nu.atoms()) {
        auto cls = classify(atom.matrix, j, params, Mode::OpenND);
        if (!cls) {
            throw MembershipViolation("stage " + std::to_string(j) +
                                      " atom " + atom.matrix.str() +
                                      " is outside the stage support");
        }
        masses[*cls] += atom.weight;
    }
    return masses;
}

}  // namespace detailnd

/// Stage 1: the identity refined with the seed split (k=0, i=1).
inline StageMeasureND stage_one_nd(const Params& params) {
    DiagMatrix I = DiagMatrix::identity(params.n);
    Laminate nu = merge_atoms(replay(split_A_nd(I, 0, 1, params)));
    auto masses = detailnd::stage_masses(nu, 1, params);
    return StageMeasureND{1, params, std::move(nu), std::move(masses)};
}

/// Advances stage j to j+1 by pushing every atom along its row.
inline StageMeasureND advance_nd(const StageMeasureND& st) {
    const Params& p = st.params;
    const long long j = st.j;
    std::map<DiagMatrix, Laminate> children;
    for (const auto& atom : st.nu.atoms()) {
        if (children.count(atom.matrix)) continue;
        auto cls = classify(atom.matrix, j, p, Mode::OpenND);
        if (!cls) {
            throw MembershipViolation("stage " + std::to_string(j) +
                                      " atom " + atom.matrix.str() +
                                      " is outside the stage support");
        }
        SplitCertificate cert = [&]() {
            switch (cls->family) {
            case SetFamily::A:
                return push_A_row_nd(atom.matrix, cls->i, j, p);
            case SetFamily::B:
                return push_B_row_nd(atom.matrix, cls->k, j, p);
            default:
                return push_S_row_nd(atom.matrix, cls->k, cls->i, cls->a, j,
                                     p);
            }
        }();
        children.emplace(atom.matrix, merge_atoms(replay(cert)));
    }
    Laminate nu = compose_measures(st.nu, children);
    auto masses = detailnd::stage_masses(nu, j + 1, p);
    return StageMeasureND{j + 1, p, std::move(nu), std::move(masses)};
}

/// Stages 1..j_max of the open-band staircase.
inline std::vector<StageMeasureND> build_sequence_nd(const Params& params,
                                                     long long j_max) {
    if (j_max < 1) {
        throw InvalidParams("build_sequence_nd needs j_max >= 1");
    }
    std::vector<StageMeasureND> stages{stage_one_nd(params)};
    while (stages.back().j < j_max) {
        stages.push_back(advance_nd(stages.back()));
    }
    return stages;
}

/// One stage mass compared against its decay bound.
struct MassBoundCheckND {
    SpectralSetId id;
    double mass;
    double bound;
    bool ok;
};

/// Checks every stage-j set mass against its decay bound with the
/// supplied constants: mass(A_j^i) against c1[i] * i^(-m1'-2+eps'),
/// mass(B_i^j) against c1[i] * i^(-2+eps') * (j+2)^(m2'-n'), and the
/// S masses against c2[small index] * (large+2)^(a-n') * (j+1-i)^(-2).
/// c1_row / c2_row hold the constants of stage j, indexed 1..j.
inline std::vector<MassBoundCheckND> check_stage_masses_nd(
    const StageMeasureND& st, const std::vector<double>& c1_row,
    const std::vector<double>& c2_row, double eps_prime) {
    const long long j = st.j;
    if (c1_row.size() < static_cast<std::size_t>(j + 1) ||
        c2_row.size() < static_cast<std::size_t>(j + 1)) {
        throw InvalidParams("constant rows are shorter than the stage");
    }
    const double n_eff = static_cast<double>(st.params.n_eff());
    const double m1_eff = static_cast<double>(st.params.m1_eff());
    const double m2_eff = static_cast<double>(st.params.m2_eff());
    std::vector<MassBoundCheckND> out;
    for (const auto& [id, mass] : st.masses) {
        double bound = 0.0;
        switch (id.family) {
        case SetFamily::A: {
            double i = static_cast<double>(id.i);
            bound = c1_row[id.i] * std::pow(i, -m1_eff - 2.0 + eps_prime);
            break;
        }
        case SetFamily::B: {
            double i = static_cast<double>(id.k);
            bound = c1_row[id.k] * std::pow(i, -2.0 + eps_prime) *
                    std::pow(static_cast<double>(j) + 2.0, m2_eff - n_eff);
            break;
        }
        case SetFamily::S: {
            // the index that is not pinned to j picks the constant
            long long free_index = id.k == j ? id.i : id.k;
            double gap = static_cast<double>(j + 1 - free_index);
            double base = id.k == j ? static_cast<double>(id.i) + 2.0
                                    : static_cast<double>(j) + 2.0;
            bound = c2_row[free_index] *
                    std::pow(base, static_cast<double>(id.a) - n_eff) /
                    (gap * gap);
            break;
        }
        }
        double m = mass.to_double();
        out.push_back(MassBoundCheckND{id, m, bound, m <= bound});
    }
    return out;
}

}  // namespace lamf
