#include "laminate_forge/staircase_nd.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace lamf;

namespace {

Rational q(long long n, long long d = 1) { return Rational(n, d); }

DiagMatrix dm(std::vector<Rational> entries) {
    return DiagMatrix(std::move(entries));
}

std::map<DiagMatrix, Rational> weight_map(const Laminate& nu) {
    Laminate merged = merge_atoms(nu);
    std::map<DiagMatrix, Rational> w;
    for (const auto& a : merged.atoms()) {
        w.emplace(a.matrix, a.weight);
    }
    return w;
}

const Params p3{3, 1, 1};
const Params p4{4, 1, 1};
const Params p4f{4, 2, 2};  // frozen regime: m1+m2 >= n

Rational set_mass(const Laminate& nu, const SpectralSetId& id) {
    Rational total(0);
    for (const auto& a : nu.atoms()) {
        if (member(a.matrix, id)) total += a.weight;
    }
    return total;
}

Rational total_weight(const Laminate& nu) {
    Rational total(0);
    for (const auto& a : nu.atoms()) total += a.weight;
    return total;
}

/// True when every atom lies in at least one of the given sets.
bool supported_in(const Laminate& nu, const std::vector<SpectralSetId>& ids) {
    for (const auto& a : nu.atoms()) {
        bool hit = false;
        for (const auto& id : ids) {
            if (member(a.matrix, id)) {
                hit = true;
                break;
            }
        }
        if (!hit) return false;
    }
    return true;
}

}  // namespace

TEST(SplitANdTest, ThreeDimSixLeafTree) {
    DiagMatrix A = dm({q(1, 2), q(1, 2), q(1)});
    SplitCertificate cert = split_A_nd(A, 1, 1, p3);
    EXPECT_EQ(cert.root, A);

    // first split: smallest small position, drop 1/3, raise i+1 = 2
    ASSERT_FALSE(cert.steps.empty());
    EXPECT_EQ(cert.steps[0], (SplitStep{0, 1, q(1, 3), q(2), q(9, 10)}));

    Laminate nu = replay(cert);
    EXPECT_TRUE(validate_certificate(cert, nu).ok);
    EXPECT_EQ(barycenter(nu), A);
    EXPECT_EQ(total_weight(nu), q(1));

    // leading atom: both smalls dropped, the large untouched
    EXPECT_EQ(nu.atoms()[0].matrix, dm({q(1, 3), q(1, 3), q(1)}));
    EXPECT_EQ(nu.atoms()[0].weight, q(81, 100));

    auto w = weight_map(nu);
    ASSERT_EQ(w.size(), 6u);
    EXPECT_EQ(w.at(dm({q(1, 3), q(1, 3), q(1)})), q(81, 100));
    EXPECT_EQ(w.at(dm({q(2), q(1, 3), q(1, 3)})), q(27, 500));
    EXPECT_EQ(w.at(dm({q(1, 3), q(2), q(1, 3)})), q(27, 500));
    EXPECT_EQ(w.at(dm({q(2), q(1, 2), q(2)})), q(1, 25));
    EXPECT_EQ(w.at(dm({q(2), q(2), q(1, 3)})), q(3, 500));
    EXPECT_EQ(w.at(dm({q(1, 3), q(2), q(2)})), q(9, 250));

    EXPECT_EQ(set_mass(nu, set_A(2, 1, Mode::OpenND, p3)), q(459, 500));
    EXPECT_EQ(set_mass(nu, set_B(2, 1, Mode::OpenND, p3)), q(41, 500));
}

TEST(SplitANdTest, SeedSplitOfIdentity) {
    // the k=0 seed: all entries of I sit in both overlapping bands, the
    // small quota fills left to right
    SplitCertificate cert = split_A_nd(DiagMatrix::identity(3), 0, 1, p3);
    Laminate nu = replay(cert);
    EXPECT_EQ(barycenter(nu), DiagMatrix::identity(3));

    EXPECT_EQ(nu.atoms()[0].matrix, dm({q(1, 2), q(1, 2), q(1)}));
    EXPECT_EQ(nu.atoms()[0].weight, q(4, 9));

    EXPECT_EQ(set_mass(nu, set_A(1, 1, Mode::OpenND, p3)), q(20, 27));
    EXPECT_EQ(set_mass(nu, set_B(1, 1, Mode::OpenND, p3)), q(7, 27));
}

TEST(SplitANdTest, FourDimSeedWithMiddleBand) {
    SplitCertificate cert = split_A_nd(DiagMatrix::identity(4), 0, 1, p4);
    Laminate nu = merge_atoms(replay(cert));
    EXPECT_EQ(barycenter(nu), DiagMatrix::identity(4));
    EXPECT_EQ(nu.size(), 14u);

    EXPECT_EQ(set_mass(nu, set_A(1, 1, Mode::OpenND, p4)), q(16, 27));
    EXPECT_EQ(set_mass(nu, set_B(1, 1, Mode::OpenND, p4)), q(1, 9));
    EXPECT_EQ(set_mass(nu, set_S(1, 1, 2, p4)), q(8, 27));

    // leading atom: three drops to 1/2, the tracked large untouched
    EXPECT_EQ(replay(cert).atoms()[0].matrix,
              dm({q(1, 2), q(1, 2), q(1, 2), q(1)}));
    EXPECT_EQ(replay(cert).atoms()[0].weight, q(8, 27));
}

TEST(SplitANdTest, LeadingAtomClosedForm) {
    std::mt19937_64 rng(7);
    DiagMatrix A = sample_member(set_A(2, 3, Mode::OpenND, p3), rng);
    SplitCertificate cert = split_A_nd(A, 2, 3, p3);
    Laminate nu = replay(cert);

    // the leading atom drops every small to 1/(k+2); its weight is the
    // product of the low factors (i+1-v)/(i+1-1/(k+2))
    std::vector<Rational> lead;
    Rational lambda1(1);
    for (std::size_t pos = 0; pos < 3; ++pos) {
        if (detail::in_small_band(A[pos], 3)) {
            lead.push_back(q(1, 4));
            lambda1 *= (q(4) - A[pos]) / (q(4) - q(1, 4));
        } else {
            lead.push_back(A[pos]);
        }
    }
    EXPECT_EQ(nu.atoms()[0].matrix, DiagMatrix(lead));
    EXPECT_EQ(nu.atoms()[0].weight, lambda1);
}

TEST(SplitANdTest, Guards) {
    EXPECT_THROW(split_A_nd(dm({q(5), q(5), q(5)}), 1, 1, p3),
                 MembershipViolation);
    EXPECT_THROW(split_A_nd(DiagMatrix::identity(3), -1, 1, p3),
                 InvalidParams);
    EXPECT_THROW(split_A_nd(DiagMatrix::identity(4), 0, 1, p3),
                 DimensionMismatch);
}

TEST(SplitBNdTest, FreshSmallThreeLeafTree) {
    DiagMatrix B = dm({q(1, 2), q(2), q(2)});
    SplitCertificate cert = split_B_nd(B, 1, 1, p3);
    Laminate nu = replay(cert);
    EXPECT_TRUE(validate_certificate(cert, nu).ok);
    EXPECT_EQ(barycenter(nu), B);

    auto w = weight_map(nu);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w.at(dm({q(1, 2), q(1, 2), q(2)})), q(2, 5));
    EXPECT_EQ(w.at(dm({q(1, 2), q(3), q(1, 2)})), q(6, 25));
    EXPECT_EQ(w.at(dm({q(1, 2), q(3), q(3)})), q(9, 25));

    EXPECT_EQ(set_mass(nu, set_A(1, 2, Mode::OpenND, p3)), q(16, 25));
    EXPECT_EQ(set_mass(nu, set_B(1, 2, Mode::OpenND, p3)), q(9, 25));
}

TEST(SplitBNdTest, LaggingSmallSixLeafTree) {
    DiagMatrix B = dm({q(1), q(2), q(2)});
    SplitCertificate cert = split_B_nd(B, 1, 1, p3);
    Laminate nu = replay(cert);
    EXPECT_EQ(barycenter(nu), B);

    auto w = weight_map(nu);
    ASSERT_EQ(w.size(), 6u);
    EXPECT_EQ(w.at(dm({q(1), q(3), q(3)})), q(9, 25));  // all larges raised
    EXPECT_EQ(w.at(dm({q(1, 2), q(3), q(1, 2)})), q(24, 125));
    EXPECT_EQ(w.at(dm({q(3), q(3), q(1, 2)})), q(6, 125));
    EXPECT_EQ(w.at(dm({q(1, 2), q(1, 2), q(2)})), q(8, 25));
    EXPECT_EQ(w.at(dm({q(3), q(1, 2), q(1, 2)})), q(4, 125));
    EXPECT_EQ(w.at(dm({q(3), q(1, 2), q(3)})), q(6, 125));

    EXPECT_EQ(set_mass(nu, set_A(1, 2, Mode::OpenND, p3)), q(68, 125));
    EXPECT_EQ(set_mass(nu, set_B(1, 2, Mode::OpenND, p3)), q(57, 125));
}

TEST(SplitBNdTest, Guards) {
    EXPECT_THROW(split_B_nd(dm({q(1, 2), q(1, 2), q(2)}), 1, 1, p3),
                 MembershipViolation);
    EXPECT_THROW(split_B_nd(dm({q(1, 2), q(2), q(2)}), 0, 1, p3),
                 InvalidParams);
}

TEST(SplitSNdTest, FourDimFourteenLeafTree) {
    DiagMatrix S = dm({q(1, 2), q(1, 2), q(2), q(2)});
    SplitCertificate cert = split_S_nd(S, 1, 1, 2, p4);
    Laminate nu = replay(cert);
    EXPECT_TRUE(validate_certificate(cert, nu).ok);
    EXPECT_EQ(barycenter(nu), S);
    EXPECT_EQ(merge_atoms(nu).size(), 14u);

    // leading atom: larges raised, smalls dropped, lands in S[k=2,i=2,a=2]
    auto w = weight_map(nu);
    EXPECT_EQ(w.at(dm({q(1, 3), q(1, 3), q(3), q(3)})), q(5625, 16384));

    EXPECT_EQ(set_mass(nu, set_A(2, 2, Mode::OpenND, p4)), q(9045, 16384));
    EXPECT_EQ(set_mass(nu, set_B(2, 2, Mode::OpenND, p4)), q(805, 16384));
    EXPECT_EQ(set_mass(nu, set_S(2, 2, 2, p4)), q(3267, 8192));
}

TEST(SplitSNdTest, Guards) {
    EXPECT_THROW(split_S_nd(dm({q(1, 2), q(1, 2), q(2)}), 1, 1, 2, p3),
                 UnsupportedRegime);
    EXPECT_THROW(split_S_nd(dm({q(5), q(5), q(5), q(5)}), 1, 1, 2, p4),
                 MembershipViolation);
}

TEST(FrozenTest, ReduceExpandRoundTrip) {
    DiagMatrix A = dm({q(1, 3), q(1, 3), q(1), q(5, 2)});
    FrozenReduction red = reduce_freeze(A, p4f);
    EXPECT_EQ(red.reduced, dm({q(1, 3), q(1, 3), q(5, 2)}));
    EXPECT_EQ(red.reduced_params, (Params{3, 1, 1}));
    EXPECT_EQ(red.kept_positions, (std::vector<std::size_t>{0, 1, 3}));
    EXPECT_EQ(red.frozen_positions, (std::vector<std::size_t>{2}));
    EXPECT_EQ(red.frozen_values, (std::vector<Rational>{q(1)}));

    Laminate reduced_nu = replay(split_A_nd(red.reduced, 2, 2,
                                            red.reduced_params));
    Laminate expanded = expand_frozen(reduced_nu, red);
    EXPECT_EQ(barycenter(expanded), A);
    for (const auto& atom : expanded.atoms()) {
        EXPECT_EQ(atom.matrix[2], q(1));
    }

    // lagging wide-band member: both k=2 and k=3 fit, the larger wins
    DiagMatrix B = dm({q(1, 3), q(1), q(3), q(3)});
    FrozenReduction redb = reduce_freeze(B, p4f);
    EXPECT_EQ(redb.reduced, dm({q(1, 3), q(3), q(3)}));
    EXPECT_TRUE(member(B, set_B(2, 2, Mode::OpenND, p4f)));
    EXPECT_TRUE(member(B, set_B(3, 2, Mode::OpenND, p4f)));
    EXPECT_TRUE(member(redb.reduced,
                       set_B(3, 2, Mode::OpenND, redb.reduced_params)));
}

TEST(FrozenTest, CaseTwoSplitKeepsFrozenEntries) {
    DiagMatrix A = dm({q(1, 3), q(1, 3), q(1), q(5, 2)});
    SplitCertificate cert = split_A_nd(A, 2, 2, p4f);
    EXPECT_EQ(cert.root, A);
    Laminate nu = replay(cert);
    EXPECT_TRUE(validate_certificate(cert, nu).ok);
    EXPECT_EQ(barycenter(nu), A);
    EXPECT_TRUE(supported_in(nu, {set_A(3, 2, Mode::OpenND, p4f),
                                  set_B(3, 2, Mode::OpenND, p4f)}));
    for (const auto& atom : nu.atoms()) {
        EXPECT_EQ(atom.matrix[2], q(1));
    }
}

TEST(FrozenTest, Guards) {
    EXPECT_THROW(reduce_freeze(DiagMatrix::identity(4), p4), // m1+m2 < n
                 UnsupportedRegime);
    EXPECT_THROW(reduce_freeze(dm({q(5), q(5), q(5), q(5)}), p4f),
                 MembershipViolation);
}

TEST(PushRowNdTest, ARowSupport) {
    DiagMatrix A = dm({q(1, 2), q(1, 2), q(1)});
    SplitCertificate cert = push_A_row_nd(A, 1, 1, p3);
    Laminate nu = merge_atoms(replay(cert));
    EXPECT_EQ(barycenter(nu), A);
    EXPECT_EQ(total_weight(nu), q(1));
    EXPECT_TRUE(supported_in(nu, {set_A(2, 1, Mode::OpenND, p3),
                                  set_A(2, 2, Mode::OpenND, p3),
                                  set_B(2, 2, Mode::OpenND, p3)}));
    // the B[k=2,i=1] strays were refined away
    for (const auto& atom : nu.atoms()) {
        auto cls = classify(atom.matrix, 2, p3, Mode::OpenND);
        ASSERT_TRUE(cls.has_value());
        if (cls->family == SetFamily::B) {
            EXPECT_EQ(cls->i, 2);
        }
    }
}

TEST(PushRowNdTest, BRowSupport) {
    DiagMatrix B = dm({q(1), q(2), q(2)});
    SplitCertificate cert = push_B_row_nd(B, 1, 1, p3);
    Laminate nu = merge_atoms(replay(cert));
    EXPECT_EQ(barycenter(nu), B);
    EXPECT_TRUE(supported_in(nu, {set_B(1, 2, Mode::OpenND, p3),
                                  set_A(2, 2, Mode::OpenND, p3),
                                  set_B(2, 2, Mode::OpenND, p3)}));
}

TEST(PushRowNdTest, SRowBothOrientations) {
    // k pinned to the stage: the fresh B strays walk their superscript up
    DiagMatrix S1 = dm({q(1, 3), q(1, 3), q(2), q(2)});
    ASSERT_TRUE(member(S1, set_S(2, 1, 2, p4)));
    Laminate nu1 = merge_atoms(replay(push_S_row_nd(S1, 2, 1, 2, 2, p4)));
    EXPECT_EQ(barycenter(nu1), S1);
    EXPECT_TRUE(supported_in(nu1, {set_A(3, 2, Mode::OpenND, p4),
                                   set_S(3, 2, 2, p4),
                                   set_A(3, 3, Mode::OpenND, p4),
                                   set_B(3, 3, Mode::OpenND, p4),
                                   set_S(3, 3, 2, p4)}));

    // i pinned to the stage: the fresh A strays walk their subscript up
    DiagMatrix S2 = dm({q(1, 2), q(1, 2), q(3), q(3)});
    ASSERT_TRUE(member(S2, set_S(1, 2, 2, p4)));
    Laminate nu2 = merge_atoms(replay(push_S_row_nd(S2, 1, 2, 2, 2, p4)));
    EXPECT_EQ(barycenter(nu2), S2);
    EXPECT_TRUE(supported_in(nu2, {set_B(2, 3, Mode::OpenND, p4),
                                   set_S(2, 3, 2, p4),
                                   set_A(3, 3, Mode::OpenND, p4),
                                   set_B(3, 3, Mode::OpenND, p4),
                                   set_S(3, 3, 2, p4)}));
}

TEST(PushRowNdTest, Guards) {
    EXPECT_THROW(push_A_row_nd(dm({q(1, 2), q(1, 2), q(1)}), 2, 1, p3),
                 InvalidParams);
    EXPECT_THROW(push_S_row_nd(dm({q(1, 3), q(1, 3), q(2), q(2)}), 2, 1, 2,
                               4, p4),
                 InvalidParams);
}

TEST(StageNdTest, ThreeDimSequence) {
    auto stages = build_sequence_nd(p3, 4);
    ASSERT_EQ(stages.size(), 4u);
    EXPECT_EQ(stages[0].masses.at(set_A(1, 1, Mode::OpenND, p3)), q(20, 27));
    EXPECT_EQ(stages[0].masses.at(set_B(1, 1, Mode::OpenND, p3)), q(7, 27));

    for (const auto& st : stages) {
        EXPECT_EQ(total_weight(st.nu), q(1));
        EXPECT_EQ(barycenter(st.nu), DiagMatrix::identity(3));
        EXPECT_EQ(barycenter(inverse_laminate(st.nu)),
                  DiagMatrix::identity(3));
        Rational mass_sum(0);
        for (const auto& [id, mass] : st.masses) {
            mass_sum += mass;
            // stage support: A_j^i, B_i^j with the stage index pinned
            if (id.family == SetFamily::A) {
                EXPECT_EQ(id.k, st.j);
            }
            if (id.family == SetFamily::B) {
                EXPECT_EQ(id.i, st.j);
            }
        }
        EXPECT_EQ(mass_sum, q(1));
    }
}

TEST(StageNdTest, FourDimSequenceWithMiddleBands) {
    auto stages = build_sequence_nd(p4, 3);
    ASSERT_EQ(stages.size(), 3u);
    EXPECT_EQ(stages[0].masses.at(set_A(1, 1, Mode::OpenND, p4)), q(16, 27));
    EXPECT_EQ(stages[0].masses.at(set_B(1, 1, Mode::OpenND, p4)), q(1, 9));
    EXPECT_EQ(stages[0].masses.at(set_S(1, 1, 2, p4)), q(8, 27));

    for (const auto& st : stages) {
        EXPECT_EQ(total_weight(st.nu), q(1));
        EXPECT_EQ(barycenter(st.nu), DiagMatrix::identity(4));
        EXPECT_EQ(barycenter(inverse_laminate(st.nu)),
                  DiagMatrix::identity(4));
        Rational mass_sum(0);
        for (const auto& [id, mass] : st.masses) {
            mass_sum += mass;
            if (id.family == SetFamily::S) {
                EXPECT_TRUE(id.k == st.j || id.i == st.j);
            }
        }
        EXPECT_EQ(mass_sum, q(1));
    }
}

TEST(StageNdTest, FrozenRegimeSequence) {
    auto stages = build_sequence_nd(p4f, 3);
    // the reduced problem is three dimensional, so stage 1 repeats the
    // three dimensional seed masses
    EXPECT_EQ(stages[0].masses.at(set_A(1, 1, Mode::OpenND, p4f)), q(20, 27));
    EXPECT_EQ(stages[0].masses.at(set_B(1, 1, Mode::OpenND, p4f)), q(7, 27));

    for (const auto& st : stages) {
        EXPECT_EQ(total_weight(st.nu), q(1));
        EXPECT_EQ(barycenter(st.nu), DiagMatrix::identity(4));
        for (const auto& [id, mass] : st.masses) {
            EXPECT_NE(id.family, SetFamily::S);  // no S sets when frozen
        }
        // the frozen entry rides along through every stage (an unresolved
        // wide-band entry may sit at 1 as well)
        for (const auto& atom : st.nu.atoms()) {
            std::size_t ones = 0;
            for (std::size_t pos = 0; pos < 4; ++pos) {
                if (atom.matrix[pos] == q(1)) ++ones;
            }
            EXPECT_GE(ones, 1u) << atom.matrix.str();
        }
    }
}

TEST(CheckMassBoundsTest, GenerousAndTightConstants) {
    auto stages = build_sequence_nd(p3, 2);
    std::vector<double> generous(8, 256.0);
    auto checks = check_stage_masses_nd(stages[1], generous, generous, 0.1);
    EXPECT_FALSE(checks.empty());
    for (const auto& c : checks) {
        EXPECT_TRUE(c.ok) << c.id.str() << " mass " << c.mass << " bound "
                          << c.bound;
    }

    std::vector<double> tiny(8, 1e-9);
    auto bad = check_stage_masses_nd(stages[1], tiny, tiny, 0.1);
    bool any_bad = false;
    for (const auto& c : bad) any_bad |= !c.ok;
    EXPECT_TRUE(any_bad);

    EXPECT_THROW(check_stage_masses_nd(stages[1], {1.0}, {1.0}, 0.1),
                 InvalidParams);
}
