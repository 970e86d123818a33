#pragma once

#include <map>
#include <vector>

#include "laminate_forge/laminate.hpp"
#include "laminate_forge/spectral_sets.hpp"

namespace lamf {

namespace detail3d {

inline const Params& params3() {
    static const Params p(3, 1, 1);
    return p;
}

/// The slot whose value differs from `shared` (two slots hold `shared`).
/// Falls back to slot `all_equal_slot` when all three agree.
inline std::size_t odd_slot(const DiagMatrix& A, const Rational& shared,
                            std::size_t all_equal_slot) {
    for (std::size_t p = 0; p < 3; ++p) {
        if (A[p] != shared) return p + 1;
    }
    return all_equal_slot;
}

}  // namespace detail3d

/// One refinement round of an A-family atom: both small entries 1/k split
/// into 1/(k+1) and i; a lagging large entry i-1 splits into i and 1/(k+1).
/// Leaves land in A_{k+1}^i and B_{k+1}^i with barycenter A.
/// (k,i) = (1,1) is degenerate (the small split weight vanishes).
inline SplitCertificate split_A_3d(const DiagMatrix& A, long long k,
                                   long long i) {
    const Params& p = detail3d::params3();
    if (k == 1 && i == 1) {
        throw InvalidParams("split_A_3d is degenerate at k=1, i=1");
    }
    if (!member(A, set_A(k, i, Mode::Exact3D, p))) {
        throw MembershipViolation("split_A_3d input " + A.str() +
                                  " is not in A[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) + "]");
    }
    Rational inv_k(1, k);
    Rational inv_k1(1, k + 1);
    Rational large_i(i);
    // all-equal only happens at k=1, sigma=1=i-1 (i=2); treat slot 3 as large
    std::size_t big = detail3d::odd_slot(A, inv_k, 3);
    std::vector<std::size_t> smalls;
    for (std::size_t q = 1; q <= 3; ++q) {
        if (q != big) smalls.push_back(q);
    }
    Rational sigma = A[big - 1];
    Rational mu = (large_i - inv_k) / (large_i - inv_k1);

    CertificateBuilder b(A);
    auto small_step = [&](std::size_t atom, std::size_t pos) {
        b.split(SplitStep{atom, pos, inv_k1, large_i, mu});
    };
    if (sigma == large_i) {
        small_step(0, smalls[0]);  // atom 1: stray with a lagging small
        small_step(0, smalls[1]);  // atom 0: A-leaf, atom 2: B-leaf
    } else {
        // sigma = i-1 lags; it splits into i and 1/(k+1)
        Rational lam = (Rational(i - 1) - inv_k1) / (large_i - inv_k1);
        Rational lag_low = Rational(1) - lam;  // weight of the 1/(k+1) child
        auto lag_step = [&](std::size_t atom) {
            b.split(SplitStep{atom, big, inv_k1, large_i, lag_low});
        };
        small_step(0, smalls[0]);  // atom 1: stray
        small_step(0, smalls[1]);  // atom 0: A-leaf (lagging large stays)
        lag_step(2);               // mixed branch resolves its large
        lag_step(1);               // stray resolves its large first
        small_step(1, smalls[1]);  // then its remaining small
    }
    for (const auto& leaf : b.atoms()) {
        if (!member(leaf.matrix, set_A(k + 1, i, Mode::Exact3D, p)) &&
            !member(leaf.matrix, set_B(k + 1, i, Mode::Exact3D, p))) {
            throw MembershipViolation("split_A_3d leaf " + leaf.matrix.str() +
                                      " escapes stage support");
        }
    }
    return b.certificate();
}

/// Mirror refinement of a B-family atom: both large entries i split into
/// i+1 and 1/k; a lagging small entry 1/(k-1) splits into 1/k and i+1.
/// Leaves land in A_k^{i+1} and B_k^{i+1} with barycenter A.
inline SplitCertificate split_B_3d(const DiagMatrix& A, long long k,
                                   long long i) {
    const Params& p = detail3d::params3();
    if (!member(A, set_B(k, i, Mode::Exact3D, p))) {
        throw MembershipViolation("split_B_3d input " + A.str() +
                                  " is not in B[k=" + std::to_string(k) +
                                  ",i=" + std::to_string(i) + "]");
    }
    Rational inv_k(1, k);
    Rational large_i(i);
    Rational raised(i + 1);
    std::size_t small_slot = detail3d::odd_slot(A, large_i, 3);
    std::vector<std::size_t> larges;
    for (std::size_t q = 1; q <= 3; ++q) {
        if (q != small_slot) larges.push_back(q);
    }
    Rational sigma1 = A[small_slot - 1];
    Rational drop_w = Rational(1) / (raised - inv_k);  // weight of the 1/k child

    CertificateBuilder b(A);
    auto large_step = [&](std::size_t atom, std::size_t pos) {
        b.split(SplitStep{atom, pos, inv_k, raised, drop_w});
    };
    if (sigma1 == inv_k) {
        large_step(0, larges[0]);  // atom 0: A-leaf with a lagging large
        large_step(1, larges[1]);  // atom 1: A-leaf, atom 2: B-leaf
    } else {
        // sigma1 = 1/(k-1) lags; it splits into 1/k and i+1
        Rational lag_w = (raised - Rational(1, k - 1)) / (raised - inv_k);
        auto lag_step = [&](std::size_t atom) {
            b.split(SplitStep{atom, small_slot, inv_k, raised, lag_w});
        };
        large_step(0, larges[0]);  // atom 0: stray with both drops pending
        large_step(1, larges[1]);  // atom 2: B-leaf (lagging small stays)
        lag_step(1);               // mixed branch resolves its small
        lag_step(0);               // stray resolves its small first
        large_step(4, larges[1]);  // then its remaining large
    }
    for (const auto& leaf : b.atoms()) {
        if (!member(leaf.matrix, set_A(k, i + 1, Mode::Exact3D, p)) &&
            !member(leaf.matrix, set_B(k, i + 1, Mode::Exact3D, p))) {
            throw MembershipViolation("split_B_3d leaf " + leaf.matrix.str() +
                                      " escapes stage support");
        }
    }
    return b.certificate();
}

/// Full stage push of an A_j^i atom: one split_A_3d, then j-i+1 rounds of
/// split_B_3d that walk every B atom's superscript up to j+1. Support lands
/// in A_{j+1}^i .. A_{j+1}^{j+1} and B_{j+1}^{j+1}.
inline SplitCertificate push_A_row_3d(const DiagMatrix& A, long long i,
                                      long long j) {
    const Params& p = detail3d::params3();
    if (!(1 <= i && i <= j)) {
        throw InvalidParams("push_A_row_3d needs 1 <= i <= j");
    }
    SplitCertificate cert = split_A_3d(A, j, i);
    for (long long r = 0; r <= j - i; ++r) {
        auto target = set_B(j + 1, i + r, Mode::Exact3D, p);
        std::map<DiagMatrix, SplitCertificate> children;
        const Laminate leaves = replay(cert);
        for (const auto& leaf : leaves.atoms()) {
            if (member(leaf.matrix, target) && !children.count(leaf.matrix)) {
                children.emplace(leaf.matrix,
                                 split_B_3d(leaf.matrix, j + 1, i + r));
            }
        }
        if (!children.empty()) {
            cert = splice(cert, children);
        }
    }
    return cert;
}

/// Full stage push of a B_i^j atom: one split_B_3d, then j-i+1 rounds of
/// split_A_3d that walk every A atom's subscript up to j+1. Support lands
/// in B_i^{j+1} .. B_{j+1}^{j+1} and A_{j+1}^{j+1}.
inline SplitCertificate push_B_row_3d(const DiagMatrix& A, long long i,
                                      long long j) {
    const Params& p = detail3d::params3();
    if (!(1 <= i && i <= j)) {
        throw InvalidParams("push_B_row_3d needs 1 <= i <= j");
    }
    SplitCertificate cert = split_B_3d(A, i, j);
    for (long long r = 0; r <= j - i; ++r) {
        auto target = set_A(i + r, j + 1, Mode::Exact3D, p);
        std::map<DiagMatrix, SplitCertificate> children;
        const Laminate leaves = replay(cert);
        for (const auto& leaf : leaves.atoms()) {
            if (member(leaf.matrix, target) && !children.count(leaf.matrix)) {
                children.emplace(leaf.matrix,
                                 split_A_3d(leaf.matrix, i + r, j + 1));
            }
        }
        if (!children.empty()) {
            cert = splice(cert, children);
        }
    }
    return cert;
}

/// One stage of the staircase: measure, per-set masses, and the tracked
/// constant C_j of the mass bounds.
struct StageMeasure3D {
    long long j;
    Laminate nu;
    std::map<SpectralSetId, Rational> masses;
    double Cj;
};

inline StageMeasure3D stage_one_3d() {
    DiagMatrix I = DiagMatrix::identity(3);
    std::map<SpectralSetId, Rational> masses;
    masses.emplace(set_A(1, 1, Mode::Exact3D, detail3d::params3()),
                   Rational(1));
    return StageMeasure3D{1, Laminate({Atom{Rational(1), I}}),
                          std::move(masses), 1.0};
}

/// Advances stage j to stage j+1 by pushing every atom along its row.
/// Stage 1 is special: the identity atom jumps straight to the (1,2) split,
/// since the (1,1) split is degenerate. The tracked constant grows by the
/// factor 1 + 12*C0/j^2.
inline StageMeasure3D advance_3d(const StageMeasure3D& st, double C0 = 1.0) {
    const Params& p = detail3d::params3();
    const long long j = st.j;
    std::map<DiagMatrix, Laminate> children;
    for (const auto& atom : st.nu.atoms()) {
        if (children.count(atom.matrix)) continue;
        SplitCertificate cert = [&]() {
            if (j == 1 && atom.matrix == DiagMatrix::identity(3)) {
                return split_A_3d(atom.matrix, 1, 2);
            }
            auto cls = classify(atom.matrix, j, p, Mode::Exact3D);
            if (!cls) {
                throw MembershipViolation("stage " + std::to_string(j) +
                                          " atom " + atom.matrix.str() +
                                          " is outside the stage support");
            }
            return cls->family == SetFamily::A
                       ? push_A_row_3d(atom.matrix, cls->i, j)
                       : push_B_row_3d(atom.matrix, cls->k, j);
        }();
        children.emplace(atom.matrix, merge_atoms(replay(cert)));
    }
    Laminate nu = compose_measures(st.nu, children);
    std::map<SpectralSetId, Rational> masses;
    for (const auto& atom : nu.atoms()) {
        auto cls = classify(atom.matrix, j + 1, p, Mode::Exact3D);
        if (!cls) {
            throw MembershipViolation("stage " + std::to_string(j + 1) +
                                      " atom " + atom.matrix.str() +
                                      " is outside the stage support");
        }
        masses[*cls] += atom.weight;
    }
    double Cj = st.Cj * (1.0 + 12.0 * C0 / static_cast<double>(j * j));
    return StageMeasure3D{j + 1, std::move(nu), std::move(masses), Cj};
}

/// Stages 1..j_max of the staircase sequence, starting from the identity.
inline std::vector<StageMeasure3D> build_sequence_3d(long long j_max,
                                                     double C0 = 1.0) {
    if (j_max < 1) {
        throw InvalidParams("build_sequence_3d needs j_max >= 1");
    }
    std::vector<StageMeasure3D> stages{stage_one_3d()};
    while (stages.back().j < j_max) {
        stages.push_back(advance_3d(stages.back(), C0));
    }
    return stages;
}

}  // namespace lamf
