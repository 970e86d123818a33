#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "laminate_forge/json_io.hpp"
#include "laminate_forge/staircase3d.hpp"

namespace lamf {
namespace {

std::string cli() { return LAMINATE_FORGE_CLI_PATH; }

std::string tmp_path(const std::string& name) {
    return ::testing::TempDir() + name;
}

int run(const std::string& args, const std::string& capture = "") {
    std::string cmd = cli() + " " + args;
    if (!capture.empty()) cmd += " > " + capture + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

TEST(CliTest, Staircase3dWritesThreeStageReport) {
    const std::string out = tmp_path("s3.json");
    ASSERT_EQ(run("staircase3d --jmax 3 --epsilon 0.1 --out " + out), 0);
    const json report = json::parse(slurp(out));
    EXPECT_EQ(report["command"], "staircase3d");
    EXPECT_EQ(report["stages"].size(), 3u);
    EXPECT_EQ(report["stages"][2]["unclassified_p_over_q"], "0");
}

TEST(CliTest, StaircaseNdRejectsBadParams) {
    const std::string log = tmp_path("bad.txt");
    EXPECT_EQ(run("staircase-nd --n 3 --m1 2 --m2 2 --jmax 2", log), 1);
    EXPECT_NE(slurp(log).find("InvalidParams"), std::string::npos);
}

TEST(CliTest, UsageErrorsExitOne) {
    EXPECT_EQ(run("", tmp_path("usage.txt")), 1);
    EXPECT_EQ(run("verify --cert only.json", tmp_path("usage2.txt")), 1);
    EXPECT_EQ(run("--help", tmp_path("help.txt")), 0);
}

TEST(CliTest, VerifyAcceptsHonestAndRejectsTamperedWeight) {
    const SplitCertificate cert =
        split_A_3d(DiagMatrix::identity(3), 1, 2);
    const Laminate nu = merge_atoms(replay(cert));
    const std::string cert_path = tmp_path("cert.json");
    const std::string lam_path = tmp_path("lam.json");
    std::ofstream(cert_path) << dump_json(certificate_to_json(cert));
    std::ofstream(lam_path) << dump_json(laminate_to_json(nu));

    const std::string log = tmp_path("verify.txt");
    EXPECT_EQ(run("verify --cert " + cert_path + " --laminate " + lam_path,
                  log),
              0);
    EXPECT_NE(slurp(log).find("certificate ok"), std::string::npos);

    json tampered = laminate_to_json(nu);
    std::swap(tampered["atoms"][0]["weight"],
              tampered["atoms"][2]["weight"]);
    ASSERT_NE(tampered["atoms"][0]["weight"],
              tampered["atoms"][2]["weight"]);
    const std::string bad_path = tmp_path("tampered.json");
    std::ofstream(bad_path) << dump_json(tampered);
    EXPECT_EQ(run("verify --cert " + cert_path + " --laminate " + bad_path,
                  log),
              2);
    EXPECT_NE(slurp(log).find("weight mismatch"), std::string::npos);
}

TEST(CliTest, VerifyRejectsMalformedJson) {
    const std::string garbled = tmp_path("garbled.json");
    std::ofstream(garbled) << "{not json";
    EXPECT_EQ(run("verify --cert " + garbled + " --laminate " + garbled,
                  tmp_path("garbled.txt")),
              1);
}

TEST(CliTest, ReportsAreByteIdenticalForSameConfigAndSeed) {
    const std::string a = tmp_path("nd_a.json");
    const std::string b = tmp_path("nd_b.json");
    const std::string flags =
        "staircase-nd --n 4 --m1 1 --m2 1 --jmax 2 --seed 7 --out ";
    ASSERT_EQ(run(flags + a), 0);
    ASSERT_EQ(run(flags + b), 0);
    const std::string body = slurp(a);
    EXPECT_EQ(body, slurp(b));
    EXPECT_FALSE(body.empty());
    EXPECT_NE(body.find("\"fitted_ctilde\""), std::string::npos);
}

TEST(CliTest, ConstantsEmitsCsvAndVerdict) {
    const std::string out = tmp_path("trace.csv");
    const std::string log = tmp_path("constants.txt");
    ASSERT_EQ(run("constants --n 3 --ctilde 2 --epsilon-prime 0.5 --jmax 12"
                  " --out " + out,
                  log),
              0);
    const std::string csv = slurp(out);
    EXPECT_NE(csv.find("j,m,c2max"), std::string::npos);
    EXPECT_NE(csv.find("1,6.400000e+1,6.400000e+1"), std::string::npos);
    EXPECT_NE(slurp(log).find("plateaued=false"), std::string::npos);
    EXPECT_EQ(run("constants --n 3 --ctilde 0.5 --jmax 5",
                  tmp_path("badc.txt")),
              1);
}

TEST(CliTest, TailsEmitsNonincreasingTable) {
    std::vector<StageMeasure3D> stages = build_sequence_3d(4);
    const std::string lam_path = tmp_path("stage4.json");
    std::ofstream(lam_path) << dump_json(laminate_to_json(stages.back().nu));
    const std::string out = tmp_path("tails.csv");
    ASSERT_EQ(run("tails --laminate " + lam_path +
                  " --tmin 2 --tmax 4 --out " + out),
              0);
    std::istringstream csv(slurp(out));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line,
              "t,mass_p_over_q,mass_float,inverse_mass_p_over_q,"
              "inverse_mass_float");
    double prev = 1.0, prev_inv = 1.0;
    int rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream fields(line);
        std::string t, pq, m, ipq, im;
        std::getline(fields, t, ',');
        std::getline(fields, pq, ',');
        std::getline(fields, m, ',');
        std::getline(fields, ipq, ',');
        std::getline(fields, im, ',');
        EXPECT_LE(std::stod(m), prev);
        EXPECT_LE(std::stod(im), prev_inv);
        prev = std::stod(m);
        prev_inv = std::stod(im);
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace lamf
