#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "laminate_forge/diag_matrix.hpp"
#include "laminate_forge/errors.hpp"
#include "laminate_forge/rational.hpp"

namespace lamf {

/// One weighted Dirac of a discrete measure on diagonal matrices.
struct Atom {
    Rational weight;
    DiagMatrix matrix;
};

inline bool operator==(const Atom& a, const Atom& b) {
    return a.weight == b.weight && a.matrix == b.matrix;
}

/// Finite discrete probability measure on positive diagonal matrices.
/// Atom matrices may repeat until merge_atoms is applied.
class Laminate {
public:
    explicit Laminate(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) {
            throw InvalidLaminate("laminate needs at least one atom");
        }
        const std::size_t n = atoms_.front().matrix.dim();
        Rational total(0);
        for (const auto& a : atoms_) {
            if (a.matrix.dim() != n) {
                throw InvalidLaminate("mixed atom dimensions");
            }
            if (a.weight.sign() < 0) {
                throw InvalidLaminate("negative atom weight " + a.weight.str());
            }
            total += a.weight;
        }
        if (total != Rational(1)) {
            throw InvalidLaminate("weights sum to " + total.str() +
                                  ", expected 1");
        }
    }

    static Laminate dirac(DiagMatrix m) {
        return Laminate({Atom{Rational(1), std::move(m)}});
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    std::size_t dim() const { return atoms_.front().matrix.dim(); }

private:
    std::vector<Atom> atoms_;
};

/// One rank-one split: the atom at atom_index has its diagonal entry at
/// `position` (1-based) replaced by `low` (weight factor lambda, stays in
/// place) and `high` (weight factor 1-lambda, appended at the end).
/// Requires lambda in (0,1) and lambda*low + (1-lambda)*high = entry exactly.
struct SplitStep {
    std::size_t atom_index = 0;
    std::size_t position = 1;
    Rational low;
    Rational high;
    Rational lambda;
};

inline bool operator==(const SplitStep& a, const SplitStep& b) {
    return a.atom_index == b.atom_index && a.position == b.position &&
           a.low == b.low && a.high == b.high && a.lambda == b.lambda;
}

/// Replayable recipe for a laminate of finite order: a root Dirac plus the
/// ordered rank-one splits that produced it.
struct SplitCertificate {
    DiagMatrix root;
    std::vector<SplitStep> steps;
};

inline bool operator==(const SplitCertificate& a, const SplitCertificate& b) {
    return a.root == b.root && a.steps == b.steps;
}

/// Incremental replay state: applies steps one at a time while keeping the
/// working atom list, so engines can inspect intermediate measures cheaply.
class CertificateBuilder {
public:
    explicit CertificateBuilder(DiagMatrix root)
        : cert_{root, {}}, atoms_{Atom{Rational(1), std::move(root)}} {}

    explicit CertificateBuilder(const SplitCertificate& cert)
        : CertificateBuilder(cert.root) {
        for (const auto& s : cert.steps) {
            split(s);
        }
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    const SplitCertificate& certificate() const { return cert_; }

    /// Validates and applies one split; throws BadIndex or NonConvexSplit.
    void split(const SplitStep& step) {
        if (step.atom_index >= atoms_.size()) {
            throw BadIndex("split atom_index " +
                           std::to_string(step.atom_index) + " out of range");
        }
        Atom& parent = atoms_[step.atom_index];
        if (step.position < 1 || step.position > parent.matrix.dim()) {
            throw BadIndex("split position " + std::to_string(step.position) +
                           " out of range");
        }
        if (step.low == step.high) {
            throw NonConvexSplit("split values coincide at " + step.low.str());
        }
        if (!(Rational(0) < step.lambda && step.lambda < Rational(1))) {
            throw NonConvexSplit("lambda " + step.lambda.str() +
                                 " outside (0,1)");
        }
        const Rational& entry = parent.matrix[step.position - 1];
        Rational mixed = step.lambda * step.low +
                         (Rational(1) - step.lambda) * step.high;
        if (mixed != entry) {
            throw NonConvexSplit("convexity identity fails: " + mixed.str() +
                                 " != " + entry.str());
        }
        Rational parent_weight = parent.weight;
        DiagMatrix low_matrix =
            parent.matrix.with_entry(step.position - 1, step.low);
        DiagMatrix high_matrix =
            parent.matrix.with_entry(step.position - 1, step.high);
        parent = Atom{step.lambda * parent_weight, std::move(low_matrix)};
        atoms_.push_back(Atom{(Rational(1) - step.lambda) * parent_weight,
                              std::move(high_matrix)});
        cert_.steps.push_back(step);
    }

    /// The terminal measure in construction order (unmerged).
    Laminate measure() const { return Laminate(atoms_); }

private:
    SplitCertificate cert_;
    std::vector<Atom> atoms_;
};

/// Certificate extended by one validated step.
inline SplitCertificate apply_split(const SplitCertificate& cert,
                                    const SplitStep& step) {
    CertificateBuilder b(cert);
    b.split(step);
    return b.certificate();
}

/// Terminal measure of a certificate, atoms in construction order.
inline Laminate replay(const SplitCertificate& cert) {
    return CertificateBuilder(cert).measure();
}

/// Weighted average of the atom matrices, exact.
inline DiagMatrix barycenter(const Laminate& nu) {
    std::vector<Rational> sum(nu.dim(), Rational(0));
    for (const auto& a : nu.atoms()) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += a.weight * a.matrix[i];
        }
    }
    return DiagMatrix(std::move(sum));
}

/// Expectation of the determinant, exact.
inline Rational det_expectation(const Laminate& nu) {
    Rational sum(0);
    for (const auto& a : nu.atoms()) {
        sum += a.weight * det(a.matrix);
    }
    return sum;
}

/// Equal matrices merged, zero weights dropped, atoms ordered
/// lexicographically by entries.
inline Laminate merge_atoms(const Laminate& nu) {
    std::map<DiagMatrix, Rational> merged;
    for (const auto& a : nu.atoms()) {
        auto [it, fresh] = merged.try_emplace(a.matrix, a.weight);
        if (!fresh) {
            it->second += a.weight;
        }
    }
    std::vector<Atom> atoms;
    atoms.reserve(merged.size());
    for (auto& [matrix, weight] : merged) {
        if (!weight.is_zero()) {
            atoms.push_back(Atom{std::move(weight), matrix});
        }
    }
    return Laminate(std::move(atoms));
}

/// nu' = sum_i lambda_i * child(A_i); atoms without a child stay as Diracs.
/// Children are given as measures; the result is merged.
inline Laminate compose_measures(const Laminate& nu,
                                 const std::map<DiagMatrix, Laminate>& children) {
    for (const auto& [key, child] : children) {
        bool found = false;
        for (const auto& a : nu.atoms()) {
            if (a.matrix == key) {
                found = true;
                break;
            }
        }
        if (!found) {
            throw RootMismatch("composition key " + key.str() +
                               " is not an atom of the base laminate");
        }
        if (barycenter(child) != key) {
            throw RootMismatch("child of " + key.str() +
                               " has barycenter " + barycenter(child).str());
        }
    }
    std::vector<Atom> atoms;
    for (const auto& a : nu.atoms()) {
        auto it = children.find(a.matrix);
        if (it == children.end()) {
            atoms.push_back(a);
            continue;
        }
        for (const auto& c : it->second.atoms()) {
            atoms.push_back(Atom{a.weight * c.weight, c.matrix});
        }
    }
    return merge_atoms(Laminate(std::move(atoms)));
}

/// Composition with certified children: each certificate's root must equal
/// its key; child measures are the certificate replays.
inline Laminate compose(const Laminate& nu,
                        const std::map<DiagMatrix, SplitCertificate>& children) {
    std::map<DiagMatrix, Laminate> measures;
    for (const auto& [key, cert] : children) {
        if (cert.root != key) {
            throw RootMismatch("certificate root " + cert.root.str() +
                               " differs from key " + key.str());
        }
        measures.emplace(key, replay(cert));
    }
    return compose_measures(nu, measures);
}

/// Splices child certificates into a base certificate: every terminal atom of
/// `base` whose matrix has a child gets that child's steps replayed on it.
/// The result replays to the same measure as compose(replay(base), children).
inline SplitCertificate splice(
    const SplitCertificate& base,
    const std::map<DiagMatrix, SplitCertificate>& children) {
    CertificateBuilder replayed(base);
    const std::vector<Atom> leaves = replayed.atoms();

    SplitCertificate out = base;
    std::size_t global_size = leaves.size();
    for (std::size_t p = 0; p < leaves.size(); ++p) {
        auto it = children.find(leaves[p].matrix);
        if (it == children.end()) {
            continue;
        }
        const SplitCertificate& child = it->second;
        if (child.root != leaves[p].matrix) {
            throw RootMismatch("certificate root " + child.root.str() +
                               " differs from key " + it->first.str());
        }
        std::vector<std::size_t> local_to_global{p};
        for (const auto& s : child.steps) {
            if (s.atom_index >= local_to_global.size()) {
                throw BadIndex("child step atom_index out of range");
            }
            SplitStep translated = s;
            translated.atom_index = local_to_global[s.atom_index];
            out.steps.push_back(translated);
            local_to_global.push_back(global_size);
            ++global_size;
        }
    }
    return out;
}

/// nu^{-1} = (1/det nubar) sum_i lambda_i det(A_i) delta_{A_i^{-1}}, merged.
inline Laminate inverse_laminate(const Laminate& nu) {
    Rational normalizer = det(barycenter(nu));
    std::vector<Atom> atoms;
    atoms.reserve(nu.size());
    for (const auto& a : nu.atoms()) {
        atoms.push_back(
            Atom{a.weight * det(a.matrix) / normalizer, inverse(a.matrix)});
    }
    return merge_atoms(Laminate(std::move(atoms)));
}

/// Outcome of validate_certificate; diagnostic names the first failure.
struct ValidationResult {
    bool ok = false;
    std::string diagnostic;
    std::optional<std::size_t> failed_step;
};

/// Replays `cert` and compares the merged result with `claimed` (merged),
/// exactly. Structural step failures are reported with their step index.
inline ValidationResult validate_certificate(const SplitCertificate& cert,
                                             const Laminate& claimed) {
    CertificateBuilder builder(cert.root);
    for (std::size_t k = 0; k < cert.steps.size(); ++k) {
        try {
            builder.split(cert.steps[k]);
        } catch (const Error& e) {
            return ValidationResult{false,
                                    "step " + std::to_string(k) + ": " +
                                        e.what(),
                                    k};
        }
    }
    Laminate got = merge_atoms(builder.measure());
    Laminate want = merge_atoms(claimed);
    if (got.dim() != want.dim()) {
        return ValidationResult{false, "dimension mismatch", std::nullopt};
    }
    if (got.size() != want.size()) {
        return ValidationResult{
            false,
            "atom count mismatch: replay has " + std::to_string(got.size()) +
                ", claimed has " + std::to_string(want.size()),
            std::nullopt};
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        const Atom& g = got.atoms()[i];
        const Atom& w = want.atoms()[i];
        if (g.matrix != w.matrix) {
            return ValidationResult{
                false, "matrix mismatch at merged atom " + std::to_string(i),
                std::nullopt};
        }
        if (g.weight != w.weight) {
            return ValidationResult{
                false,
                "weight mismatch at " + g.matrix.str() + ": replay " +
                    g.weight.str() + ", claimed " + w.weight.str(),
                std::nullopt};
        }
    }
    return ValidationResult{true, "", std::nullopt};
}

}  // namespace lamf
