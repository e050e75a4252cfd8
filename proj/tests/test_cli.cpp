#include "cbfquad/log_io.hpp"
#include "cbfquad/scenario_file.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace cbfquad;

namespace {

const std::string kCli = CBFQUAD_CLI;
const std::string kScenarios = CBFQUAD_SCENARIOS;

struct CliRun
{
    int code;
    std::string out;
};

CliRun cli(const std::string& args, const std::string& env = "")
{
    const fs::path capture = fs::temp_directory_path() / ("cbfquad_cli_" + std::to_string(::getpid()) + ".txt");
    const std::string cmd = env + " \"" + kCli + "\" " + args + " > \"" + capture.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(capture);
    std::ostringstream o;
    o << in.rdbuf();
    fs::remove(capture);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, o.str()};
}

class CliTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("cbfquad_test_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string out(const std::string& sub = "out") const { return (dir_ / sub).string(); }

    fs::path dir_;
};

std::size_t count_lines(const fs::path& p)
{
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST_F(CliTest, ValidateEchoesVehicleParameters)
{
    const CliRun r = cli("validate " + kScenarios + "/tracking.cfg");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("m = 1.500"), std::string::npos);
    EXPECT_NE(r.out.find("f_Tmax = 39.000"), std::string::npos);
}

TEST_F(CliTest, RunTrackingWritesFullLog)
{
    const CliRun r = cli("run " + kScenarios + "/tracking.cfg --out " + out());
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(count_lines(fs::path(out()) / "log.csv"), 7002u);  // header + 7001 records
    EXPECT_TRUE(fs::exists(fs::path(out()) / "path.svg"));
    EXPECT_TRUE(fs::exists(fs::path(out()) / "inputs.svg"));
}

TEST_F(CliTest, BarrelRollWithoutFilterFails)
{
    const CliRun r = cli("run " + kScenarios + "/barrel_roll.cfg --no-filter --out " + out());
    EXPECT_TRUE(r.code == 1 || r.code == 3) << r.code << r.out;
}

TEST_F(CliTest, ReportFromCsvMatchesRun)
{
    const CliRun run = cli("run " + kScenarios + "/barrel_roll.cfg --duration 3 --out " + out());
    const CliRun rep = cli("report " + kScenarios + "/barrel_roll.cfg --duration 3 --out " + out());
    EXPECT_EQ(run.code, rep.code);
    EXPECT_NE(rep.out.find("source: "), std::string::npos);
    // The report block printed by both commands is identical.
    const auto block = [](const std::string& s) { return s.substr(s.find("records:")); };
    EXPECT_EQ(block(run.out), block(rep.out));
}

TEST_F(CliTest, ReportWithoutLogRunsScenario)
{
    const CliRun rep = cli("report " + kScenarios + "/tracking.cfg --duration 1 --out " + out());
    EXPECT_EQ(rep.code, 0) << rep.out;
    EXPECT_NE(rep.out.find("fresh run"), std::string::npos);
    EXPECT_NE(rep.out.find("records: 101"), std::string::npos);
}

TEST_F(CliTest, DeterministicOutput)
{
    cli("run " + kScenarios + "/tracking.cfg --duration 5 --out " + out("a"));
    cli("run " + kScenarios + "/tracking.cfg --duration 5 --out " + out("b"));
    std::ifstream a(fs::path(out("a")) / "log.csv"), b(fs::path(out("b")) / "log.csv");
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_FALSE(sa.str().empty());
    EXPECT_EQ(sa.str(), sb.str());
}

TEST_F(CliTest, NoFilterChangesOnlyTheFilterStage)
{
    cli("run " + kScenarios + "/barrel_roll.cfg --duration 1 --out " + out("on"));
    cli("run " + kScenarios + "/barrel_roll.cfg --duration 1 --no-filter --out " + out("off"));
    std::ifstream on(fs::path(out("on")) / "log.csv"), off(fs::path(out("off")) / "log.csv");
    const auto a = read_csv(on);
    const auto b = read_csv(off);
    ASSERT_EQ(a.size(), b.size());
    // Same initial state and nominal command; the applied input differs.
    EXPECT_EQ(detail::to_row(a[0]).at(17), detail::to_row(b[0]).at(17));
    EXPECT_EQ(a[0].state.position, b[0].state.position);
    EXPECT_TRUE(a[0].filter_active);
    EXPECT_FALSE(b[0].filter_active);
    EXPECT_EQ(b[0].safe, b[0].nominal);
}

TEST_F(CliTest, EnvironmentOverridesConfigDirButNotFlag)
{
    const std::string env = "CBFQUAD_OUT_DIR=" + out("env");
    cli("run " + kScenarios + "/tracking.cfg --duration 0.5", env);
    EXPECT_TRUE(fs::exists(fs::path(out("env")) / "log.csv"));
    cli("run " + kScenarios + "/tracking.cfg --duration 0.5 --out " + out("flag"), env);
    EXPECT_TRUE(fs::exists(fs::path(out("flag")) / "log.csv"));
}

TEST_F(CliTest, BadConfigExitsTwoWithLineNumber)
{
    const fs::path cfg = dir_ / "bad.cfg";
    {
        std::ifstream in(kScenarios + "/tracking.cfg");
        std::ofstream o(cfg);
        std::string line;
        while (std::getline(in, line)) {
            o << (line == "mass = 1.500" ? "mass = one" : line) << '\n';
        }
    }
    const CliRun r = cli("validate " + cfg.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("bad.cfg:"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("mass"), std::string::npos);
}

TEST_F(CliTest, StrictPolicyRefusalExitsTwo)
{
    const fs::path cfg = dir_ / "strict.cfg";
    {
        std::ifstream in(kScenarios + "/tracking.cfg");
        std::ofstream o(cfg);
        std::string line;
        while (std::getline(in, line)) {
            if (line == "initial_set_policy = warn") line = "initial_set_policy = strict";
            if (line == "position = 0 0 3") line = "position = 0 0 6.5";
            o << line << '\n';
        }
    }
    EXPECT_EQ(cli("run " + cfg.string() + " --out " + out()).code, 2);
    EXPECT_EQ(cli("validate " + cfg.string()).code, 2);
}

TEST_F(CliTest, UsageErrors)
{
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("fly " + kScenarios + "/tracking.cfg").code, 2);
    EXPECT_EQ(cli("run").code, 2);
    EXPECT_EQ(cli("run " + kScenarios + "/tracking.cfg --duration -3").code, 2);
}
