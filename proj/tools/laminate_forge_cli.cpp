#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "laminate_forge/analysis.hpp"
#include "laminate_forge/constants.hpp"
#include "laminate_forge/json_io.hpp"
#include "laminate_forge/report.hpp"
#include "laminate_forge/staircase3d.hpp"
#include "laminate_forge/staircase_nd.hpp"

namespace {

using namespace lamf;

void write_text(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw InvalidParams("cannot open output file " + path);
    }
    out << content;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidParams("cannot open input file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

int run_staircase3d(long long jmax, double epsilon, std::uint64_t seed,
                    const std::string& out) {
    const Params& p = detail3d::params3();
    std::vector<StageMeasure3D> stages = build_sequence_3d(jmax);
    json stage_reports = json::array();
    json ratios = json::array();
    for (const StageMeasure3D& st : stages) {
        stage_reports.push_back(
            stage_report(st.nu, st.j, p, Mode::Exact3D, seed));
        double ratio_a = 0.0, ratio_b = 0.0;
        for (const auto& [id, mass] : st.masses) {
            const double i = static_cast<double>(
                id.family == SetFamily::A ? id.i : id.k);
            const double m = mass.to_double();
            if (id.family == SetFamily::A) {
                ratio_a = std::max(ratio_a, m * std::pow(i, 3.0 - epsilon));
            } else {
                ratio_b = std::max(ratio_b,
                                   m * std::pow(i, 2.0 - epsilon) *
                                       static_cast<double>(st.j * st.j));
            }
        }
        ratios.push_back(json{{"stage", st.j},
                              {"ratio_A", ratio_a},
                              {"ratio_B", ratio_b}});
    }
    json report{{"command", "staircase3d"}, {"seed", seed},
                {"jmax", jmax},            {"epsilon", epsilon},
                {"stages", stage_reports}, {"mass_ratios", ratios}};
    write_text(out, dump_json(report));
    return 0;
}

/// Linear-space constant rows of stage j, indexed 0..j.
std::pair<std::vector<double>, std::vector<double>> constant_rows(
    double eps_prime, double c_tilde, std::size_t n, long long j) {
    const ConstantsTrace tr = constants_run(eps_prime, c_tilde, n, j);
    std::vector<double> c1(j + 1), c2(j + 1);
    for (long long i = 0; i <= j; ++i) {
        c1[i] = std::exp(tr.final_log_c1[i]);
        c2[i] = std::exp(tr.final_log_c2[i]);
    }
    return {std::move(c1), std::move(c2)};
}

int run_staircase_nd(std::size_t n, std::size_t m1, std::size_t m2,
                     long long jmax, double eps_prime, std::uint64_t seed,
                     const std::string& out) {
    const Params params(n, m1, m2);
    std::vector<StageMeasureND> stages = build_sequence_nd(params, jmax);

    // smallest power-of-two c~ whose constant tables absorb every stage
    double fitted = 0.0;
    std::vector<std::vector<MassBoundCheckND>> checks;
    for (double c_tilde = 2.0; c_tilde <= 1048576.0; c_tilde *= 2.0) {
        checks.clear();
        bool all_ok = true;
        for (const StageMeasureND& st : stages) {
            auto [c1, c2] = constant_rows(eps_prime, c_tilde, n, st.j);
            checks.push_back(check_stage_masses_nd(st, c1, c2, eps_prime));
            for (const MassBoundCheckND& c : checks.back()) {
                all_ok = all_ok && c.ok;
            }
        }
        if (all_ok) {
            fitted = c_tilde;
            break;
        }
    }
    if (fitted == 0.0) {
        throw MassBoundViolation(
            "stage masses exceed the decay bounds for every tried c~");
    }

    json stage_reports = json::array();
    json bounds = json::array();
    for (std::size_t s = 0; s < stages.size(); ++s) {
        stage_reports.push_back(stage_report(stages[s].nu, stages[s].j,
                                             params, Mode::OpenND, seed));
        json rows = json::array();
        for (const MassBoundCheckND& c : checks[s]) {
            rows.push_back(json{{"set", c.id.str()},
                                {"mass", c.mass},
                                {"bound", c.bound},
                                {"ok", c.ok}});
        }
        bounds.push_back(json{{"stage", stages[s].j}, {"checks", rows}});
    }
    json report{{"command", "staircase-nd"},
                {"seed", seed},
                {"params", json{{"n", n}, {"m1", m1}, {"m2", m2}}},
                {"jmax", jmax},
                {"epsilon_prime", eps_prime},
                {"fitted_ctilde", fitted},
                {"stages", stage_reports},
                {"bounds", bounds}};
    write_text(out, dump_json(report));
    return 0;
}

int run_constants(std::size_t n, double c_tilde, double eps_prime,
                  long long jmax, const std::string& out) {
    const ConstantsTrace trace = constants_run(eps_prime, c_tilde, n, jmax);
    std::ostringstream csv;
    constants_csv(trace, csv);
    write_text(out, csv.str());
    const BoundednessReport rep = detect_bounded(trace);
    std::cout << "plateaued=" << (rep.plateaued ? "true" : "false");
    if (!rep.reason.empty()) std::cout << " reason=" << rep.reason;
    std::cout << " m_sup_log10=" << rep.m_sup_log10
              << " c2_sup_log10=" << rep.c2_sup_log10 << '\n';
    return 0;
}

int run_verify(const std::string& cert_path, const std::string& lam_path) {
    const SplitCertificate cert = certificate_from_json(load_json(cert_path));
    const Laminate claimed = laminate_from_json(load_json(lam_path));
    const ValidationResult result = validate_certificate(cert, claimed);
    if (!result.ok) {
        std::cout << "invalid: " << result.diagnostic << '\n';
        return 2;
    }
    std::cout << "certificate ok: " << cert.steps.size() << " steps, "
              << claimed.atoms().size() << " atoms\n";
    return 0;
}

int run_tails(const std::string& lam_path, long long t_min, long long t_max,
              const std::string& out) {
    if (t_min < 1 || t_max < t_min) {
        throw InvalidParams("tails needs 1 <= tmin <= tmax");
    }
    const Laminate nu = laminate_from_json(load_json(lam_path));
    std::vector<double> ts;
    for (long long t = t_min; t <= t_max; ++t) {
        ts.push_back(static_cast<double>(t));
    }
    const TailTable fwd = tail(nu, ts);
    const TailTable inv = tail_inverse(nu, ts);
    std::ostringstream csv;
    csv << "t,mass_p_over_q,mass_float,inverse_mass_p_over_q,"
           "inverse_mass_float\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        csv << ts[i] << ',' << fwd.masses_exact[i].str() << ','
            << fwd.masses[i] << ',' << inv.masses_exact[i].str() << ','
            << inv.masses[i] << '\n';
    }
    write_text(out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"staircase laminate toolkit"};
    app.require_subcommand(1);

    long long jmax3 = 3;
    double epsilon = 0.1;
    std::uint64_t seed = 0;
    std::string out;
    CLI::App* s3 = app.add_subcommand("staircase3d",
                                      "build the exact 3-D stage sequence");
    s3->add_option("--jmax", jmax3, "number of stages");
    s3->add_option("--epsilon", epsilon, "tail exponent margin");
    s3->add_option("--seed", seed, "recorded in the report");
    s3->add_option("--out", out, "report path (stdout if omitted)");

    std::size_t n = 4, m1 = 1, m2 = 1;
    long long jmax_nd = 3;
    double eps_prime = 0.1;
    CLI::App* snd = app.add_subcommand("staircase-nd",
                                       "build an n-dimensional sequence");
    snd->add_option("--n", n, "dimension");
    snd->add_option("--m1", m1, "vanishing-entry count");
    snd->add_option("--m2", m2, "blow-up entry count");
    snd->add_option("--jmax", jmax_nd, "number of stages");
    snd->add_option("--epsilon-prime", eps_prime, "decay exponent margin");
    snd->add_option("--seed", seed, "recorded in the report");
    snd->add_option("--out", out, "report path (stdout if omitted)");

    double c_tilde = 2.0;
    long long jmax_c = 100;
    CLI::App* sc = app.add_subcommand("constants",
                                      "run the constant recursion");
    sc->add_option("--n", n, "dimension");
    sc->add_option("--ctilde", c_tilde, "recursion constant, > 1");
    sc->add_option("--epsilon-prime", eps_prime, "decay exponent margin");
    sc->add_option("--jmax", jmax_c, "number of stages");
    sc->add_option("--out", out, "CSV path (stdout if omitted)");

    std::string cert_path, lam_path;
    CLI::App* sv = app.add_subcommand("verify",
                                      "replay a split certificate");
    sv->add_option("--cert", cert_path, "certificate JSON")->required();
    sv->add_option("--laminate", lam_path, "claimed laminate JSON")
        ->required();

    long long t_min = 2, t_max = 6;
    CLI::App* st = app.add_subcommand("tails",
                                      "tail tables of a stored laminate");
    st->add_option("--laminate", lam_path, "laminate JSON")->required();
    st->add_option("--tmin", t_min, "first integer threshold");
    st->add_option("--tmax", t_max, "last integer threshold");
    st->add_option("--out", out, "CSV path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (s3->parsed()) return run_staircase3d(jmax3, epsilon, seed, out);
        if (snd->parsed()) {
            return run_staircase_nd(n, m1, m2, jmax_nd, eps_prime, seed, out);
        }
        if (sc->parsed()) {
            return run_constants(n, c_tilde, eps_prime, jmax_c, out);
        }
        if (sv->parsed()) return run_verify(cert_path, lam_path);
        return run_tails(lam_path, t_min, t_max, out);
    } catch (const InvalidParams& e) {
        std::cerr << "InvalidParams: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "ParseError: " << e.what() << '\n';
        return 1;
    } catch (const MassBoundViolation& e) {
        std::cerr << "MassBoundViolation: " << e.what() << '\n';
        return 2;
    } catch (const AmbiguousMembership& e) {
        std::cerr << "AmbiguousMembership: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return 2;
    }
}
