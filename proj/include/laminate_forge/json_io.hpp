#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "laminate_forge/diag_matrix.hpp"
#include "laminate_forge/errors.hpp"
#include "laminate_forge/laminate.hpp"
#include "laminate_forge/rational.hpp"

namespace lamf {

/// Insertion-ordered JSON so serialized artifacts are byte-stable.
using json = nlohmann::ordered_json;

/// Canonical textual dump used by every file the tools emit.
inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline json matrix_to_json(const DiagMatrix& m) {
    json arr = json::array();
    for (const auto& e : m.entries()) {
        arr.push_back(e.str());
    }
    return arr;
}

inline DiagMatrix matrix_from_json(const json& j) {
    if (!j.is_array()) {
        throw ParseError("matrix JSON must be an array of rationals");
    }
    std::vector<Rational> entries;
    entries.reserve(j.size());
    for (const auto& item : j) {
        if (!item.is_string()) {
            throw ParseError("matrix entry must be a rational string");
        }
        entries.push_back(Rational::parse(item.get<std::string>()));
    }
    return DiagMatrix(std::move(entries));
}

inline json certificate_to_json(const SplitCertificate& cert) {
    json steps = json::array();
    for (const auto& s : cert.steps) {
        steps.push_back(json{{"atom_index", s.atom_index},
                             {"position", s.position},
                             {"low", s.low.str()},
                             {"high", s.high.str()},
                             {"lambda", s.lambda.str()}});
    }
    return json{{"root", matrix_to_json(cert.root)}, {"steps", steps}};
}

inline SplitCertificate certificate_from_json(const json& j) {
    if (!j.contains("root") || !j.contains("steps")) {
        throw ParseError("certificate JSON needs 'root' and 'steps'");
    }
    SplitCertificate cert{matrix_from_json(j["root"]), {}};
    for (const auto& s : j["steps"]) {
        SplitStep step;
        step.atom_index = s.at("atom_index").get<std::size_t>();
        step.position = s.at("position").get<std::size_t>();
        step.low = Rational::parse(s.at("low").get<std::string>());
        step.high = Rational::parse(s.at("high").get<std::string>());
        step.lambda = Rational::parse(s.at("lambda").get<std::string>());
        cert.steps.push_back(std::move(step));
    }
    return cert;
}

inline json laminate_to_json(const Laminate& nu) {
    json atoms = json::array();
    for (const auto& a : nu.atoms()) {
        atoms.push_back(json{{"weight", a.weight.str()},
                             {"matrix", matrix_to_json(a.matrix)}});
    }
    return json{{"atoms", atoms}};
}

inline Laminate laminate_from_json(const json& j) {
    if (!j.contains("atoms")) {
        throw ParseError("laminate JSON needs 'atoms'");
    }
    std::vector<Atom> atoms;
    for (const auto& a : j["atoms"]) {
        atoms.push_back(
            Atom{Rational::parse(a.at("weight").get<std::string>()),
                 matrix_from_json(a.at("matrix"))});
    }
    return Laminate(std::move(atoms));
}

}  // namespace lamf
