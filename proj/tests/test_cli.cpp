#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string output;
};

Result run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "ridgepath_cli_test.log";
    const std::string cmd = std::string(RIDGEPATH_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string config(const std::string& name) { return std::string(RIDGEPATH_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Cli, VerifySmokeConfigSucceeds) {
    const Result r = run("verify --config " + config("smoke.conf"));
    EXPECT_EQ(r.code, 0) << r.output;
}

TEST(Cli, MissingConfigIsInputError) {
    const Result r = run("verify --config /nonexistent/missing.conf");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("/nonexistent/missing.conf"), std::string::npos) << r.output;
}

TEST(Cli, UnknownSettingIsInputError) {
    const Result r = run("simulate --config " + config("smoke.conf") + " --set bogus=1");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("bogus"), std::string::npos) << r.output;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, SimulateWritesReproducibleCsv) {
    const fs::path dir = fs::temp_directory_path() / "ridgepath_cli_sim";
    fs::create_directories(dir);
    const std::string base = "simulate --config " + config("smoke.conf") + " --replicates 3 --out ";
    ASSERT_EQ(run(base + (dir / "a.csv").string() + " --plot " + (dir / "plot.csv").string()).code, 0);
    ASSERT_EQ(run(base + (dir / "b.csv").string()).code, 0);
    const std::string a = slurp(dir / "a.csv");
    EXPECT_NE(a.find("method,param,gamma,A,S,C,total_mean,total_se,bound_rhs,satisfied"), std::string::npos);
    EXPECT_NE(a.find("# seed: 7"), std::string::npos);
    EXPECT_EQ(a, slurp(dir / "b.csv"));
    EXPECT_EQ(slurp(dir / "plot.csv").rfind("method,gamma,param,x_quadratic", 0), 0u);
    fs::remove_all(dir);
}

TEST(Cli, CompareAndOracleRun) {
    EXPECT_EQ(run("compare --config " + config("smoke.conf") + " --mode analytic").code, 0);
    EXPECT_EQ(run("compare --config " + config("smoke.conf") + " --mode mc --replicates 4").code, 0);
    EXPECT_EQ(run("oracle --config " + config("smoke.conf") + " --replicates 4").code, 0);
}

TEST(Cli, IngestReadsCsv) {
    const fs::path dir = fs::temp_directory_path() / "ridgepath_cli_ingest";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "data.csv");
        out << "label,x1,x2,x3,y\n";
        for (int i = 0; i < 20; ++i)
            out << "row" << i << ',' << i % 7 << ',' << (i * i) % 5 << ',' << (3 * i) % 11 << ','
                << (i % 7) + 0.5 * ((3 * i) % 11) << "\n";
    }
    const Result r = run("ingest --data " + (dir / "data.csv").string() +
                         " --response-column y --standardise --splits 3 --out " + (dir / "out.csv").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(slurp(dir / "out.csv").find("method,param,criterion_mean,criterion_se"), std::string::npos);
    EXPECT_EQ(run("ingest --data " + (dir / "data.csv").string() + " --response-column nope").code, 2);
    fs::remove_all(dir);
}
