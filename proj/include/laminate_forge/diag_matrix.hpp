#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "laminate_forge/errors.hpp"
#include "laminate_forge/rational.hpp"

namespace lamf {

/// Positive-definite diagonal matrix with exact rational entries.
/// Entries are positional (the split lemmas act on specific coordinates);
/// set membership uses the sorted view.
class DiagMatrix {
public:
    explicit DiagMatrix(std::vector<Rational> entries)
        : entries_(std::move(entries)) {
        if (entries_.size() < 2) {
            throw InvalidParams("DiagMatrix needs dimension >= 2");
        }
        for (const auto& e : entries_) {
            if (e.sign() <= 0) {
                throw NonPositiveEntry("diagonal entry must be positive, got " +
                                       e.str());
            }
        }
    }

    static DiagMatrix identity(std::size_t n) {
        return DiagMatrix(std::vector<Rational>(n, Rational(1)));
    }

    std::size_t dim() const { return entries_.size(); }

    /// 0-based positional access.
    const Rational& operator[](std::size_t i) const { return entries_.at(i); }

    const std::vector<Rational>& entries() const { return entries_; }

    /// Copy with one positional entry replaced (0-based).
    DiagMatrix with_entry(std::size_t i, Rational value) const {
        if (i >= entries_.size()) {
            throw BadIndex("entry index out of range");
        }
        std::vector<Rational> next = entries_;
        next[i] = std::move(value);
        return DiagMatrix(std::move(next));
    }

    friend bool operator==(const DiagMatrix& a, const DiagMatrix& b) {
        return a.entries_ == b.entries_;
    }
    friend bool operator!=(const DiagMatrix& a, const DiagMatrix& b) {
        return !(a == b);
    }

    /// Lexicographic order by positional entries; canonical atom ordering.
    friend bool operator<(const DiagMatrix& a, const DiagMatrix& b) {
        return std::lexicographical_compare(a.entries_.begin(),
                                            a.entries_.end(),
                                            b.entries_.begin(),
                                            b.entries_.end());
    }

    std::string str() const {
        std::string out = "diag(";
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (i > 0) {
                out += ",";
            }
            out += entries_[i].str();
        }
        out += ")";
        return out;
    }

    friend std::ostream& operator<<(std::ostream& os, const DiagMatrix& m) {
        return os << m.str();
    }

private:
    std::vector<Rational> entries_;
};

/// Product of the diagonal entries, exact.
inline Rational det(const DiagMatrix& d) {
    Rational p(1);
    for (const auto& e : d.entries()) {
        p *= e;
    }
    return p;
}

/// Entrywise reciprocal.
inline DiagMatrix inverse(const DiagMatrix& d) {
    std::vector<Rational> inv;
    inv.reserve(d.dim());
    for (const auto& e : d.entries()) {
        inv.push_back(Rational(1) / e);
    }
    return DiagMatrix(std::move(inv));
}

/// Operator norm: the largest entry (singular values are the entries).
inline Rational op_norm(const DiagMatrix& d) {
    return *std::max_element(d.entries().begin(), d.entries().end());
}

/// Singular values sigma_1 <= ... <= sigma_n.
inline std::vector<Rational> sorted_spectrum(const DiagMatrix& d) {
    std::vector<Rational> s = d.entries();
    std::stable_sort(s.begin(), s.end());
    return s;
}

/// Operator norm of A - B for equal-dimension diagonal matrices.
inline Rational op_distance(const DiagMatrix& a, const DiagMatrix& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch("op_distance on different dimensions");
    }
    Rational best(0);
    for (std::size_t i = 0; i < a.dim(); ++i) {
        Rational gap = abs(a[i] - b[i]);
        if (gap > best) {
            best = gap;
        }
    }
    return best;
}

}  // namespace lamf
