// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "gestura/landmarks.hpp"
#include "synthetic_hand.hpp"

namespace gestura {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const fs::path kSmoke = fs::path(GESTURA_TEST_DATA) / "smoke";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gestura_cli_" + std::to_string(std::random_device{}()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str({});
    err_.str({});
    return cli::run(args, out_, err_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, HelpAndBadArguments) {
  EXPECT_EQ(run({"--help"}), cli::kOk);
  EXPECT_NE(out_.str().find("encode"), std::string::npos);
  EXPECT_EQ(run({"encode", "--help"}), cli::kOk);
  EXPECT_EQ(run({}), cli::kInputError);
  EXPECT_EQ(run({"dance"}), cli::kInputError);
  EXPECT_EQ(run({"encode", path("missing.json"), "-o", path("out")}), cli::kInputError);
  EXPECT_EQ(run({"eval", (kSmoke / "manifest.json").string(), "--repetitions", "0"}), cli::kInputError);
}

TEST_F(Cli, EncodeWritesWindows) {
  ASSERT_EQ(run({"encode", (kSmoke / "home_1.stream.json").string(), "-o", path("enc")}), cli::kOk)
      << err_.str();
  EXPECT_NE(out_.str().find("1 window"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "enc" / "window_0.matrix.json"));
  EXPECT_TRUE(fs::exists(dir_ / "enc" / "window_0.prompt.txt"));
  const auto m = json::parse(slurp(dir_ / "enc" / "window_0.matrix.json"));
  EXPECT_TRUE(m.is_object());

  std::ofstream(path("broken.json")) << "{\"frames\": [";
  EXPECT_EQ(run({"encode", path("broken.json"), "-o", path("enc2")}), cli::kInputError);
  EXPECT_FALSE(fs::exists(dir_ / "enc2" / "window_0.matrix.json"));
}

TEST_F(Cli, GroundWithScriptedBackend) {
  ASSERT_EQ(run({"encode", (kSmoke / "home_1.stream.json").string(), "-o", path("enc")}), cli::kOk);
  const auto matrix = path("enc/window_0.matrix.json");
  const auto library = (kSmoke / "home_1.library.json").string();
  const auto backend = "scripted:" + (kSmoke / "home_1.fixtures.json").string();

  ASSERT_EQ(run({"ground", matrix, "-l", library, "--backend", backend, "--transcript", path("t.jsonl"),
                 "--conclusion", path("c.json"), "--debug-log", path("debug.log")}),
            cli::kOk)
      << err_.str();
  const auto c = json::parse(slurp(path("c.json")));
  EXPECT_EQ(c.at("status"), "concluded");
  EXPECT_EQ(c.at("conclusion").at(0), "4");
  EXPECT_EQ(c.at("rounds"), 2);
  EXPECT_NE(slurp(path("t.jsonl")).find("\"role\":\"outcome\""), std::string::npos);
  EXPECT_FALSE(slurp(path("debug.log")).empty());

  // The prompt-text form of the matrix is accepted as well.
  EXPECT_EQ(run({"ground", path("enc/window_0.prompt.txt"), "-l", library, "--backend", backend}), cli::kOk);

  EXPECT_EQ(run({"ground", matrix, "-l", library}), cli::kInputError);
  EXPECT_EQ(run({"ground", matrix, "-l", library, "--backend", backend, "--setting", "most"}), cli::kInputError);
  EXPECT_EQ(run({"ground", matrix, "-l", library, "--backend", backend, "--max-rounds", "0"}), cli::kInputError);

  std::ofstream(path("down.json")) << R"([{"error": "transport"}])";
  EXPECT_EQ(run({"ground", matrix, "-l", library, "--backend", "scripted:" + path("down.json")}),
            cli::kTransportFailure);
  std::ofstream(path("junk.json")) << R"([{"response": "no"}, {"response": "still no"}])";
  EXPECT_EQ(run({"ground", matrix, "-l", library, "--backend", "scripted:" + path("junk.json")}), cli::kNegative);
}

TEST_F(Cli, EvalReports) {
  ASSERT_EQ(run({"eval", (kSmoke / "manifest.json").string(), "--repetitions", "1", "--settings", "baseline,all",
                 "--json", path("r.json"), "--csv", path("r.csv"), "--transcripts", path("tr")}),
            cli::kOk)
      << err_.str();
  const auto r = json::parse(slurp(path("r.json")));
  EXPECT_EQ(r.at("settings").size(), 2u);
  EXPECT_EQ(r.at("tasks"), 3);
  EXPECT_NE(slurp(path("r.csv")).find("random_guess,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "tr" / "all_home_1_rep0.jsonl"));
  EXPECT_EQ(run({"eval", (kSmoke / "manifest.json").string(), "--settings", "some"}), cli::kInputError);
}

TEST_F(Cli, ContextAddAndShow) {
  std::ofstream(path("values.json")) << R"([{"id": "1", "name": "Play"}, {"id": "2", "name": "Pause"}])";
  ASSERT_EQ(run({"context", "add", "-l", path("lib.json"), "-n", "function_list", "-d", "Functions.", "--values",
                 path("values.json")}),
            cli::kOk)
      << err_.str();
  EXPECT_EQ(run({"context", "add", "-l", path("lib.json"), "-n", "history", "-d", "Recent use."}), cli::kOk);
  EXPECT_EQ(run({"context", "add", "-l", path("lib.json"), "-n", "history", "-d", "Again."}), cli::kInputError);

  EXPECT_EQ(run({"context", "show", "-l", path("lib.json")}), cli::kOk);
  EXPECT_EQ(out_.str(), "function_list\nhistory\n");
  EXPECT_EQ(run({"context", "show", "-l", path("lib.json"), "-n", "function_list", "--path", "last/name"}),
            cli::kOk);
  EXPECT_EQ(json::parse(out_.str()), "Pause");
  EXPECT_EQ(run({"context", "show", "-l", path("lib.json"), "--prompt"}), cli::kOk);
  EXPECT_NE(out_.str().find("function_list"), std::string::npos);
  EXPECT_NE(run({"context", "show", "-l", path("lib.json"), "-n", "gaze"}), cli::kOk);
}

TEST_F(Cli, TuneWritesThresholds) {
  const auto open = testing::make_hand(testing::open_hand());
  auto bent_pose = testing::open_hand();
  bent_pose.bend[1] = {0, 90, 60};
  const auto bent = testing::make_hand(bent_pose);
  const auto lm = [](const HandLandmarkFrame& f) {
    json a = json::array();
    for (const auto& p : f.landmarks) a.push_back({p.x, p.y, p.z});
    return a;
  };
  {
    std::ofstream ds(path("ds.jsonl"));
    ds << json{{"rule", "flexion:index"}, {"acceptable_states", {"straight"}}, {"frame", {{"lm", lm(open)}}}}.dump()
       << "\n";
    ds << json{{"rule", "flexion:index"}, {"acceptable_states", {"bent"}}, {"frame", {{"lm", lm(bent)}}}}.dump()
       << "\n";
  }
  ASSERT_EQ(run({"tune", path("ds.jsonl"), "-o", path("th.json"), "--report", path("rep.json")}), cli::kOk)
      << err_.str();
  EXPECT_TRUE(json::parse(slurp(path("th.json"))).is_object());
  EXPECT_TRUE(json::parse(slurp(path("rep.json"))).contains("rules"));
  EXPECT_EQ(run({"tune", path("ds.jsonl"), "-o", path("th2.json"), "--unsure-weight", "-1"}), cli::kInputError);
}

}  // namespace
}  // namespace gestura
