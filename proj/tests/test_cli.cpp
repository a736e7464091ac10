#include "aeal/sim.hpp"
#include "subprocess.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>

using namespace aeal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = AEAL_CLI_PATH;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("aeal_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Runs the CLI; stdout lands in `name`.out.
  int run(const std::string& name, std::vector<std::string> args) {
    args.insert(args.begin(), kCli);
    return testproc::run(args, path(name + ".out"), path(name + ".err"));
  }

  std::vector<std::string> lines(const std::string& name) const {
    std::vector<std::string> out;
    std::istringstream in(testproc::slurp(path(name + ".out")));
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  /// Writes the two agents' CSVs for a Setting 2 draw.
  void write_agents(const LossFamily& fam, Eigen::Index n = 300) {
    Rng rng(77);
    SimDesign d;
    d.setting = Setting::S2;
    d.n = n;
    d.fam = fam;
    d.hypothesis = Hypothesis::H1;
    simulate(d, rng).data.write_csv(path("a.csv"), path("b.csv"));
  }

  struct Pair {
    int alice = -1;
    int bob = -1;
    json alice_out;
    json bob_out;
  };

  Pair run_pair(const std::vector<std::string>& alice_extra, const std::vector<std::string>& bob_extra) {
    std::vector<std::string> bob{kCli, "agent", "--role", "bob", "--data", path("b.csv"), "--listen", "127.0.0.1:0",
                                 "--port-file", path("port")};
    bob.insert(bob.end(), bob_extra.begin(), bob_extra.end());
    const pid_t pb = testproc::spawn(bob, path("bob.out"), path("bob.err"));
    std::string port = testproc::wait_for_file(path("port"));
    port.erase(port.find_last_not_of("\n") + 1);
    std::vector<std::string> alice{kCli, "agent", "--role", "alice", "--data", path("a.csv"), "--connect",
                                   "127.0.0.1:" + port};
    alice.insert(alice.end(), alice_extra.begin(), alice_extra.end());
    Pair p;
    p.alice = testproc::run(alice, path("alice.out"), path("alice.err"));
    p.bob = testproc::wait(pb);
    if (p.alice == 0) p.alice_out = json::parse(testproc::slurp(path("alice.out")));
    if (p.bob == 0) p.bob_out = json::parse(testproc::slurp(path("bob.out")));
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, QqWritesOneRowPerReplicationAndWidth) {
  ASSERT_EQ(run("qq", {"qq", "--reps", "100", "--t-max", "5", "--seed", "4"}), 0);
  const auto l = lines("qq");
  ASSERT_EQ(l.size(), 502u);
  EXPECT_TRUE(l[0].starts_with("# aeal qq {"));
  EXPECT_EQ(l[1], "replication,t,p_value");
  int bad = 0;
  for (std::size_t i = 2; i < l.size(); ++i) {
    const double p = std::stod(l[i].substr(l[i].rfind(',') + 1));
    bad += !(p >= 0.0 && p <= 1.0);
  }
  EXPECT_EQ(bad, 0);
}

TEST_F(Cli, SameSeedSameBytes) {
  ASSERT_EQ(run("a", {"qq", "--reps", "5", "--seed", "9", "--laplace-scale", "0.5"}), 0);
  ASSERT_EQ(run("b", {"qq", "--reps", "5", "--seed", "9", "--laplace-scale", "0.5"}), 0);
  ASSERT_EQ(run("c", {"qq", "--reps", "5", "--seed", "10", "--laplace-scale", "0.5"}), 0);
  EXPECT_EQ(testproc::slurp(path("a.out")), testproc::slurp(path("b.out")));
  EXPECT_NE(lines("a")[2], lines("c")[2]);
}

TEST_F(Cli, ConfigFileMatchesFlags) {
  std::ofstream(path("cfg.json")) << R"({"reps": 4, "t_max": 2, "seed": 3, "family": "logistic"})";
  ASSERT_EQ(run("cfg", {"qq", "--config", path("cfg.json")}), 0);
  ASSERT_EQ(run("flags", {"qq", "--reps", "4", "--t-max", "2", "--seed", "3"}), 0);
  EXPECT_EQ(lines("cfg").size(), 2u + 8u);
  EXPECT_EQ(testproc::slurp(path("cfg.out")), testproc::slurp(path("flags.out")));
  // a command-line flag after the config still wins
  ASSERT_EQ(run("override", {"qq", "--config", path("cfg.json"), "--reps", "1"}), 0);
  EXPECT_EQ(lines("override").size(), 2u + 2u);
}

TEST_F(Cli, PowerAndRobustColumns) {
  ASSERT_EQ(run("pw", {"power", "--reps", "10", "--setting", "1", "3", "--n", "400", "--t", "1", "2", "--noise", "0"}),
            0);
  const auto p = lines("pw");
  ASSERT_EQ(p.size(), 2u + 4u);
  EXPECT_EQ(p[1], "setting,n,t,noise_scale,reject_rate");
  EXPECT_TRUE(p[2].starts_with("1,400,1,"));
  ASSERT_EQ(run("ru", {"robust-u", "--reps", "5", "--n", "400", "--t", "2", "--noise", "0", "0.5", "--u-draws", "3"}), 0);
  const auto r = lines("ru");
  ASSERT_EQ(r.size(), 2u + 2u);
  EXPECT_EQ(r[1], "scenario,noise,matches_out_of_reps,reps");
}

TEST_F(Cli, InputErrorsExitOne) {
  EXPECT_EQ(run("nofile", {"agent", "--role", "alice", "--data", path("missing.csv"), "--connect", "127.0.0.1:9"}), 1);
  EXPECT_EQ(run("badflag", {"qq", "--no-such-flag"}), 1);
  EXPECT_EQ(run("badrole", {"agent", "--role", "carol", "--data", "x"}), 1);
  EXPECT_EQ(run("badtest", {"qq", "--reps", "1", "--test", "score"}), 1);
  EXPECT_EQ(run("help", {"--help"}), 0);
}

TEST_F(Cli, TrainOverTcp) {
  write_agents(LossFamily::gaussian());
  const Pair p = run_pair({"--family", "gaussian", "--transcript", path("alice.log")}, {});
  ASSERT_EQ(p.alice, 0) << testproc::slurp(path("alice.err"));
  ASSERT_EQ(p.bob, 0) << testproc::slurp(path("bob.err"));
  const json& tr = p.alice_out["train"];
  EXPECT_EQ(tr["coefficients"].size(), 8u);
  EXPECT_EQ(p.bob_out["train"]["coefficients"].size(), 8u);
  const int rounds = tr["rounds"];
  EXPECT_EQ(p.alice_out["offset_messages"].get<int>(), 2 * rounds + 1);
  EXPECT_LE(tr["max_block_gradient"].get<double>(), 1e-9);
  EXPECT_EQ(p.bob_out["stop_reason"], tr["stop_reason"]);
  const std::string log = testproc::slurp(path("alice.log"));
  EXPECT_TRUE(log.starts_with("> {\"type\":\"Hello\""));
}

TEST_F(Cli, ScreenOverTcp) {
  write_agents(LossFamily::logistic(), 600);
  const Pair p = run_pair({"--family", "logistic", "--mode", "screen", "--t", "2"}, {"--u-seed", "5"});
  ASSERT_EQ(p.alice, 0) << testproc::slurp(path("alice.err"));
  ASSERT_EQ(p.bob, 0) << testproc::slurp(path("bob.err"));
  EXPECT_EQ(p.alice_out["screen"]["df"], 2);
  EXPECT_EQ(p.alice_out["screen"]["p_value"], p.bob_out["screen"]["p_value"]);
  EXPECT_EQ(p.alice_out["offset_messages"], 0);
}

TEST_F(Cli, VersionMismatchExitsTwo) {
  write_agents(LossFamily::gaussian(), 100);
  const Pair p = run_pair({"--protocol-version", "aeal/0"}, {});
  EXPECT_EQ(p.alice, 2);
  EXPECT_EQ(p.bob, 2);
  EXPECT_NE(testproc::slurp(path("bob.err")).find("version"), std::string::npos);
}

TEST_F(Cli, FamilyRefusedByBob) {
  write_agents(LossFamily::gaussian(), 100);
  const Pair p = run_pair({"--family", "gaussian"}, {"--family", "poisson"});
  EXPECT_EQ(p.alice, 2);
  EXPECT_EQ(p.bob, 2);
}
