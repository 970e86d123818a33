#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "laminate_forge/diag_matrix.hpp"
#include "laminate_forge/errors.hpp"
#include "laminate_forge/rational.hpp"

namespace lamf {

/// Two evaluation regimes for the spectral set families. Exact3D pins
/// eigenvalues to exact grid values (1/k and integers); OpenND uses open
/// rational bands around those values.
enum class Mode { Exact3D, OpenND };

enum class SetFamily { A, B, S };

/// Dimension and target ranks. The effective values (n', m1', m2') follow
/// the two-case reduction: identity when m1+m2 <= n-1, otherwise the
/// middle eigenvalues are frozen and the problem drops to dimension
/// 2n-m1-m2-1.
struct Params {
    std::size_t n;
    std::size_t m1;
    std::size_t m2;

    Params(std::size_t n_, std::size_t m1_, std::size_t m2_)
        : n(n_), m1(m1_), m2(m2_) {
        if (n < 3 || m1 < 1 || m2 < 1 || m1 > n - 2 || m2 > n - 2) {
            throw InvalidParams("require 1 <= m1, m2 <= n-2, got n=" +
                                std::to_string(n_) + " m1=" +
                                std::to_string(m1_) + " m2=" +
                                std::to_string(m2_));
        }
    }

    bool case_two() const { return m1 + m2 >= n; }
    bool s_sets_exist() const { return m1 + m2 + 1 < n; }

    std::size_t frozen_count() const {
        return case_two() ? m1 + m2 - n + 1 : 0;
    }
    std::size_t n_eff() const { return n - frozen_count(); }
    std::size_t m1_eff() const { return m1 - frozen_count(); }
    std::size_t m2_eff() const { return m2 - frozen_count(); }

    bool operator==(const Params& o) const {
        return n == o.n && m1 == o.m1 && m2 == o.m2;
    }
    bool operator!=(const Params& o) const { return !(*this == o); }
};

/// Identifier of one set in the A/B/S families. Use the set_A/set_B/set_S
/// factories; they validate index ranges per family and mode.
struct SpectralSetId {
    SetFamily family;
    long long k;
    long long i;
    long long a;  // only meaningful for S
    Mode mode;
    Params params;

    std::string str() const {
        std::string f = family == SetFamily::A   ? "A"
                        : family == SetFamily::B ? "B"
                                                 : "S";
        std::string out = f + "[k=" + std::to_string(k) +
                          ",i=" + std::to_string(i);
        if (family == SetFamily::S) {
            out += ",a=" + std::to_string(a);
        }
        return out + "]";
    }

    friend bool operator==(const SpectralSetId& x, const SpectralSetId& y) {
        return x.family == y.family && x.k == y.k && x.i == y.i &&
               x.a == y.a && x.mode == y.mode && x.params == y.params;
    }
    friend bool operator!=(const SpectralSetId& x, const SpectralSetId& y) {
        return !(x == y);
    }
    friend bool operator<(const SpectralSetId& x, const SpectralSetId& y) {
        auto key = [](const SpectralSetId& s) {
            return std::tuple<int, long long, long long, long long>(
                static_cast<int>(s.family), s.k, s.i, s.a);
        };
        return key(x) < key(y);
    }
};

namespace detail {

inline void check_mode_params(Mode mode, const Params& p) {
    if (mode == Mode::Exact3D && (p.n != 3 || p.m1 != 1 || p.m2 != 1)) {
        throw InvalidParams("exact-3d sets require n=3, m1=m2=1");
    }
}

}  // namespace detail

inline SpectralSetId set_A(long long k, long long i, Mode mode,
                           const Params& params) {
    detail::check_mode_params(mode, params);
    long long k_min = mode == Mode::OpenND ? 0 : 1;  // k=0 seeds the staircase
    if (k < k_min || i < 1) {
        throw InvalidParams("set A indices out of range: k=" +
                            std::to_string(k) + " i=" + std::to_string(i));
    }
    return SpectralSetId{SetFamily::A, k, i, 0, mode, params};
}

inline SpectralSetId set_B(long long k, long long i, Mode mode,
                           const Params& params) {
    detail::check_mode_params(mode, params);
    if (k < 1 || i < 1) {
        throw InvalidParams("set B indices out of range: k=" +
                            std::to_string(k) + " i=" + std::to_string(i));
    }
    return SpectralSetId{SetFamily::B, k, i, 0, mode, params};
}

inline SpectralSetId set_S(long long k, long long i, long long a,
                           const Params& params) {
    if (!params.s_sets_exist()) {
        throw InvalidParams("S sets are empty unless m1+m2 < n-1");
    }
    if (k < 0 || i < 1) {
        throw InvalidParams("set S indices out of range");
    }
    long long a_lo = static_cast<long long>(params.m2) + 1;
    long long a_hi = static_cast<long long>(params.n - params.m1) - 1;
    if (a < a_lo || a > a_hi) {
        throw InvalidParams("S band split a=" + std::to_string(a) +
                            " outside [" + std::to_string(a_lo) + "," +
                            std::to_string(a_hi) + "]");
    }
    return SpectralSetId{SetFamily::S, k, i, a, Mode::OpenND, params};
}

namespace detail {

/// |v - 1/c| < 1/(4c^2), the tight band around 1/c. c >= 1.
inline bool in_small_band(const Rational& v, long long c) {
    Rational center(1, c);
    Rational radius(1, 4 * c * c);
    return abs(v - center) < radius;
}

/// (1/(k+1) - 1/(4(k+1)^2), 1/k + 1/(4k^2)): spans both the k and k+1
/// small bands; the loose band of the B family. k >= 1.
inline bool in_wide_band(const Rational& v, long long k) {
    Rational lo = Rational(1, k + 1) - Rational(1, 4 * (k + 1) * (k + 1));
    Rational hi = Rational(1, k) + Rational(1, 4 * k * k);
    return lo < v && v < hi;
}

/// (i - 1/4, i + 5/4): the loose band of large entries in the A family.
inline bool in_A_large_band(const Rational& v, long long i) {
    return Rational(4 * i - 1, 4) < v && v < Rational(4 * i + 5, 4);
}

/// |v - (i+1)| < 1/4: the tight band of large entries in the B/S families.
inline bool in_B_large_band(const Rational& v, long long i) {
    return abs(v - Rational(i + 1)) < Rational(1, 4);
}

/// (1/2, 2): the band of frozen entries in the m1+m2 >= n regime.
inline bool in_frozen_band(const Rational& v) {
    return Rational(1, 2) < v && v < Rational(2);
}

inline std::vector<Rational> sorted_entries(const DiagMatrix& D) {
    return sorted_spectrum(D);
}

inline bool is_identity(const DiagMatrix& D) {
    return D == DiagMatrix::identity(D.dim());
}

}  // namespace detail

/// Evaluates the defining predicate of the set on sorted_spectrum(D).
/// Exact3D uses exact equalities; OpenND strict rational inequalities.
inline bool member(const DiagMatrix& D, const SpectralSetId& s) {
    const Params& p = s.params;
    if (D.dim() != p.n) {
        throw DimensionMismatch("matrix dimension " + std::to_string(D.dim()) +
                                " does not match params n=" +
                                std::to_string(p.n));
    }
    std::vector<Rational> v = detail::sorted_entries(D);
    const std::size_t n = p.n;

    if (s.mode == Mode::Exact3D) {
        if (s.family == SetFamily::A) {
            // sigma1 = sigma2 = 1/k, sigma3 in {i-1, i} \ {0}
            Rational inv_k(1, s.k);
            if (v[0] != inv_k || v[1] != inv_k) return false;
            if (v[2] == Rational(s.i)) return true;
            return s.i >= 2 && v[2] == Rational(s.i - 1);
        }
        // sigma1 in {1/k, 1/(k-1)} \ {inf}, sigma2 = sigma3 = i, D != I
        if (detail::is_identity(D)) return false;
        if (v[1] != Rational(s.i) || v[2] != Rational(s.i)) return false;
        if (v[0] == Rational(1, s.k)) return true;
        return s.k >= 2 && v[0] == Rational(1, s.k - 1);
    }

    // OpenND: check sorted ranks against the band layout of the family.
    auto all_in = [&](std::size_t lo, std::size_t hi, auto&& pred) {
        for (std::size_t r = lo; r < hi; ++r) {
            if (!pred(v[r])) return false;
        }
        return true;
    };
    const long long k = s.k;
    const long long i = s.i;

    if (!p.case_two()) {
        switch (s.family) {
        case SetFamily::A:
            return all_in(0, n - p.m1,
                          [&](const Rational& x) {
                              return detail::in_small_band(x, k + 1);
                          }) &&
                   all_in(n - p.m1, n, [&](const Rational& x) {
                       return detail::in_A_large_band(x, i);
                   });
        case SetFamily::B:
            return all_in(0, p.m2,
                          [&](const Rational& x) {
                              return detail::in_wide_band(x, k);
                          }) &&
                   all_in(p.m2, n, [&](const Rational& x) {
                       return detail::in_B_large_band(x, i);
                   });
        case SetFamily::S:
            return all_in(0, static_cast<std::size_t>(s.a),
                          [&](const Rational& x) {
                              return detail::in_small_band(x, k + 1);
                          }) &&
                   all_in(static_cast<std::size_t>(s.a), n,
                          [&](const Rational& x) {
                              return detail::in_B_large_band(x, i);
                          });
        }
    }

    // m1+m2 >= n: a block of frozen entries sits in (1/2, 2).
    if (s.family == SetFamily::A) {
        return all_in(0, n - p.m1,
                      [&](const Rational& x) {
                          return detail::in_small_band(x, k + 1);
                      }) &&
               all_in(n - p.m1, p.m2 + 1,
                      [&](const Rational& x) {
                          return detail::in_frozen_band(x);
                      }) &&
               all_in(p.m2 + 1, n, [&](const Rational& x) {
                   return detail::in_A_large_band(x, i);
               });
    }
    if (s.family == SetFamily::B) {
        return all_in(0, n - p.m1 - 1,
                      [&](const Rational& x) {
                          return detail::in_wide_band(x, k);
                      }) &&
               all_in(n - p.m1 - 1, p.m2,
                      [&](const Rational& x) {
                          return detail::in_frozen_band(x);
                      }) &&
               all_in(p.m2, n, [&](const Rational& x) {
                   return detail::in_B_large_band(x, i);
               });
    }
    return false;  // S sets are empty in the frozen regime
}

/// Predicate D -> member(inverse(D), s).
struct InverseSetPredicate {
    SpectralSetId id;
    bool operator()(const DiagMatrix& D) const {
        return member(inverse(D), id);
    }
};

inline InverseSetPredicate inverse_set(const SpectralSetId& s) {
    return InverseSetPredicate{s};
}

/// The unique stage-j set containing D among
///   A_j^i, B_i^j (i <= j) and S_{j,i}^a, S_{i,j}^a.
/// Ties inside a family (an entry sitting on a shared grid value matches
/// two adjacent indices) resolve to the largest index, matching the
/// terminal-leaf labels of the split trees. Cross-family ambiguity throws.
inline std::optional<SpectralSetId> classify(const DiagMatrix& D,
                                             long long stage,
                                             const Params& params, Mode mode) {
    std::vector<SpectralSetId> hits;
    auto probe = [&](const SpectralSetId& id) {
        if (member(D, id)) hits.push_back(id);
    };
    for (long long i = 1; i <= stage; ++i) {
        probe(set_A(stage, i, mode, params));
        probe(set_B(i, stage, mode, params));
        if (mode == Mode::OpenND && params.s_sets_exist()) {
            long long a_lo = static_cast<long long>(params.m2) + 1;
            long long a_hi = static_cast<long long>(params.n - params.m1) - 1;
            for (long long a = a_lo; a <= a_hi; ++a) {
                probe(set_S(stage, i, a, params));
                if (i != stage) {
                    probe(set_S(i, stage, a, params));
                }
            }
        }
    }
    if (hits.empty()) return std::nullopt;

    // keep only the largest free index per family
    std::vector<SpectralSetId> best;
    for (const auto& h : hits) {
        bool dominated = false;
        for (const auto& o : hits) {
            if (o.family != h.family || o == h) continue;
            if (h.family == SetFamily::A && o.i > h.i) dominated = true;
            if (h.family == SetFamily::B && o.k > h.k) dominated = true;
            if (h.family == SetFamily::S &&
                (o.k > h.k || (o.k == h.k && o.i > h.i))) {
                dominated = true;
            }
        }
        if (!dominated) best.push_back(h);
    }
    if (best.size() > 1) {
        std::string names;
        for (const auto& b : best) {
            names += (names.empty() ? "" : ", ") + b.str();
        }
        throw AmbiguousMembership("stage " + std::to_string(stage) +
                                  " membership not unique for " + D.str() +
                                  ": " + names);
    }
    return best.front();
}

/// Smallest slack (in the entrywise order) between the sorted entries of a
/// member and the edges of its defining bands. Positive for every OpenND
/// member; 0 for non-members and in Exact3D (where bands are points).
inline Rational membership_margin(const DiagMatrix& D,
                                  const SpectralSetId& s) {
    if (s.mode == Mode::Exact3D || !member(D, s)) return Rational(0);
    const Params& p = s.params;
    std::vector<Rational> v = detail::sorted_entries(D);
    const std::size_t n = p.n;
    Rational margin(-1);
    auto update = [&](const Rational& slack) {
        if (margin < Rational(0) || slack < margin) margin = slack;
    };
    auto band_slack = [&](const Rational& x, const Rational& lo,
                          const Rational& hi) {
        update(x - lo);
        update(hi - x);
    };
    auto small_slack = [&](const Rational& x, long long c) {
        Rational r(1, 4 * c * c);
        update(r - abs(x - Rational(1, c)));
    };
    auto layout = [&](std::size_t r) -> int {
        // 0 small, 1 wide, 2 A-large, 3 B-large, 4 frozen
        if (!p.case_two()) {
            if (s.family == SetFamily::A) return r < n - p.m1 ? 0 : 2;
            if (s.family == SetFamily::B) return r < p.m2 ? 1 : 3;
            return r < static_cast<std::size_t>(s.a) ? 0 : 3;
        }
        if (s.family == SetFamily::A) {
            if (r < n - p.m1) return 0;
            return r < p.m2 + 1 ? 4 : 2;
        }
        if (r < n - p.m1 - 1) return 1;
        return r < p.m2 ? 4 : 3;
    };
    for (std::size_t r = 0; r < n; ++r) {
        switch (layout(r)) {
        case 0:
            small_slack(v[r], s.k + 1);
            break;
        case 1:
            band_slack(v[r],
                       Rational(1, s.k + 1) -
                           Rational(1, 4 * (s.k + 1) * (s.k + 1)),
                       Rational(1, s.k) + Rational(1, 4 * s.k * s.k));
            break;
        case 2:
            band_slack(v[r], Rational(4 * s.i - 1, 4),
                       Rational(4 * s.i + 5, 4));
            break;
        case 3:
            band_slack(v[r], Rational(4 * s.i + 3, 4),
                       Rational(4 * s.i + 5, 4));
            break;
        default:
            band_slack(v[r], Rational(1, 2), Rational(2));
            break;
        }
    }
    return margin;
}

/// Draws a member with entries on the 64-point grid inside each defining
/// band (endpoints excluded). Entries come out ascending. Deterministic
/// given the generator state.
inline DiagMatrix sample_member(const SpectralSetId& s, std::mt19937_64& rng) {
    const Params& p = s.params;
    auto grid = [&](const Rational& lo, const Rational& hi) {
        std::uint64_t u = 1 + rng() % 63;
        return lo + (hi - lo) * Rational(static_cast<long long>(u), 64);
    };
    if (s.mode == Mode::Exact3D) {
        std::vector<Rational> v;
        if (s.family == SetFamily::A) {
            v = {Rational(1, s.k), Rational(1, s.k), Rational(0)};
            if (s.i == 1) {
                v[2] = Rational(1);
            } else {
                v[2] = (rng() % 2 == 0) ? Rational(s.i) : Rational(s.i - 1);
            }
        } else {
            std::vector<Rational> lows = {Rational(1, s.k)};
            if (s.k >= 2) lows.push_back(Rational(1, s.k - 1));
            // drop a draw that would produce the excluded identity
            std::erase(lows, Rational(s.i));
            if (lows.empty()) {
                throw InvalidParams("set " + s.str() + " is empty");
            }
            v = {lows[rng() % lows.size()], Rational(s.i), Rational(s.i)};
        }
        // rotate the odd slot through the positions for coverage
        std::size_t rot = rng() % 3;
        std::rotate(v.begin(), v.begin() + rot, v.end());
        return DiagMatrix(v);
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Rational> v;
        auto push_small = [&](long long c) {
            Rational center(1, c), radius(1, 4 * c * c);
            v.push_back(grid(center - radius, center + radius));
        };
        auto push_wide = [&](long long k) {
            v.push_back(grid(Rational(1, k + 1) -
                                 Rational(1, 4 * (k + 1) * (k + 1)),
                             Rational(1, k) + Rational(1, 4 * k * k)));
        };
        auto push_A_large = [&](long long i) {
            v.push_back(grid(Rational(4 * i - 1, 4), Rational(4 * i + 5, 4)));
        };
        auto push_B_large = [&](long long i) {
            v.push_back(grid(Rational(4 * i + 3, 4), Rational(4 * i + 5, 4)));
        };
        auto push_frozen = [&]() {
            v.push_back(grid(Rational(1, 2), Rational(2)));
        };
        const std::size_t n = p.n;
        if (!p.case_two()) {
            if (s.family == SetFamily::A) {
                for (std::size_t r = 0; r < n - p.m1; ++r) push_small(s.k + 1);
                for (std::size_t r = n - p.m1; r < n; ++r) push_A_large(s.i);
            } else if (s.family == SetFamily::B) {
                for (std::size_t r = 0; r < p.m2; ++r) push_wide(s.k);
                for (std::size_t r = p.m2; r < n; ++r) push_B_large(s.i);
            } else {
                auto a = static_cast<std::size_t>(s.a);
                for (std::size_t r = 0; r < a; ++r) push_small(s.k + 1);
                for (std::size_t r = a; r < n; ++r) push_B_large(s.i);
            }
        } else if (s.family == SetFamily::A) {
            for (std::size_t r = 0; r < n - p.m1; ++r) push_small(s.k + 1);
            for (std::size_t r = n - p.m1; r < p.m2 + 1; ++r) push_frozen();
            for (std::size_t r = p.m2 + 1; r < n; ++r) push_A_large(s.i);
        } else {
            for (std::size_t r = 0; r < n - p.m1 - 1; ++r) push_wide(s.k);
            for (std::size_t r = n - p.m1 - 1; r < p.m2; ++r) push_frozen();
            for (std::size_t r = p.m2; r < n; ++r) push_B_large(s.i);
        }
        std::sort(v.begin(), v.end());
        DiagMatrix candidate(v);
        if (member(candidate, s)) return candidate;
    }
    throw InvalidParams("failed to sample a member of " + s.str());
}

}  // namespace lamf
