// Runs one rank-one split on a 4x4 member of an A-band set, prints the
// resulting atoms, then shows the certificate surviving a JSON round trip
// and validate_certificate rejecting a tampered weight.

#include "laminate_forge/json_io.hpp"
#include "laminate_forge/spectral_sets.hpp"
#include "laminate_forge/staircase_nd.hpp"

#include <cstdio>

using namespace lamf;

int main() {
    const Params params(4, 1, 1);
    const DiagMatrix A({Rational(1, 2), Rational(1, 2), Rational(1, 2),
                        Rational(1)});
    std::printf("root A = %s, member of A_1^1: %s\n", A.str().c_str(),
                member(A, set_A(1, 1, Mode::OpenND, params)) ? "yes" : "no");

    const SplitCertificate cert = split_A_nd(A, 1, 1, params);
    const Laminate nu = merge_atoms(replay(cert));
    std::printf("split_A_nd produced %zu merged atoms:\n", nu.atoms().size());
    for (const Atom& atom : nu.atoms()) {
        std::printf("  weight %-12s matrix %s\n", atom.weight.str().c_str(),
                    atom.matrix.str().c_str());
    }
    std::printf("barycenter restored: %s\n",
                barycenter(nu) == A ? "yes" : "no");

    const auto json = certificate_to_json(cert);
    const SplitCertificate back = certificate_from_json(json);
    std::printf("JSON round trip bit-exact: %s\n",
                back == cert ? "yes" : "no");

    Laminate tampered = nu;
    // swap two weights so the sum still reads 1 but the replay disagrees
    auto atoms = tampered.atoms();
    std::swap(atoms.front().weight, atoms.back().weight);
    tampered = Laminate(atoms);
    const auto verdict = validate_certificate(cert, tampered);
    std::printf("tampered laminate rejected: %s (%s)\n",
                verdict.ok ? "no" : "yes", verdict.diagnostic.c_str());
    return 0;
}
