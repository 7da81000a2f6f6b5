/* Copyright 2026 The sigrnn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <gtest/gtest.h>

#include "sigrnn/cli.hpp"

namespace sigrnn {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream s(text);
  for (std::string l; std::getline(s, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("sigrnn_cli_" + std::string(info->name()) + "_" + std::to_string(getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::vector<fs::path> run_dirs(const std::string& parent) const {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir_ / parent)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::string> small_train(const std::string& parent) const {
    return {"train", "--synth", "lagged_mean", "--model", "gru", "--horizon", "1", "--seed", "1", "--synth_n", "300",
            "--hidden", "6", "--batch_size", "32", "--max_epochs", "3", "--out_dir", path(parent)};
  }

  fs::path dir_;
};

TEST_F(CliTest, TrainWritesTheFourArtifacts) {
  const Result r = run(small_train("runs"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dirs = run_dirs("runs");
  ASSERT_EQ(dirs.size(), 1u);
  for (const char* f : {"model.ckpt", "history.csv", "config.txt", "metrics.csv"}) {
    EXPECT_TRUE(fs::exists(dirs[0] / f)) << f;
  }
  const std::string cfg = slurp(dirs[0] / "config.txt");
  EXPECT_NE(cfg.find("task=minmax\n"), std::string::npos);
  EXPECT_NE(cfg.find("hidden=6\n"), std::string::npos);
  EXPECT_NE(cfg.find("lr=1e-3\n"), std::string::npos);
  EXPECT_EQ(lines(slurp(dirs[0] / "history.csv")).front(), "epoch,train_loss,val_loss,lr");
  EXPECT_EQ(lines(slurp(dirs[0] / "history.csv")).size(), 4u);
  const auto m = lines(slurp(dirs[0] / "metrics.csv"));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], "seed,train_r2,val_r2,test_r2,test_mse,best_epoch,epochs,seconds");
}

TEST_F(CliTest, RepeatsAppendMeanAndStd) {
  auto args = small_train("runs");
  args.insert(args.end(), {"--repeats", "5", "--max_epochs", "1"});
  const Result r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dir = run_dirs("runs").front();
  const auto m = lines(slurp(dir / "metrics.csv"));
  ASSERT_EQ(m.size(), 8u);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(m[1 + k].substr(0, 2), std::to_string(1 + k) + ",");
  EXPECT_EQ(m[6].substr(0, 5), "mean,");
  EXPECT_EQ(m[7].substr(0, 4), "std,");
  for (int s = 1; s <= 5; ++s) EXPECT_TRUE(fs::exists(dir / ("seed-" + std::to_string(s)) / "model.ckpt"));
  EXPECT_NE(r.out.find("| Model | Test R2 (mean) | Test R2 (std) |"), std::string::npos);
}

TEST_F(CliTest, RunsNeverOverwriteAndAreDeterministic) {
  ASSERT_EQ(run(small_train("runs")).code, 0);
  ASSERT_EQ(run(small_train("runs")).code, 0);
  const auto dirs = run_dirs("runs");
  ASSERT_EQ(dirs.size(), 2u);
  EXPECT_EQ(slurp(dirs[0] / "model.ckpt"), slurp(dirs[1] / "model.ckpt"));
  EXPECT_EQ(slurp(dirs[0] / "history.csv"), slurp(dirs[1] / "history.csv"));
  EXPECT_EQ(slurp(dirs[0] / "config.txt"), slurp(dirs[1] / "config.txt"));
}

TEST_F(CliTest, UsageErrors) {
  Result r = run({"train", "--synth", "lagged_mean", "--model", "rnn"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("valid variants"), std::string::npos);

  r = run({"train", "--synth", "lagged_mean", "--bogus", "1"});
  EXPECT_EQ(r.code, 1);

  std::ofstream(path("bad.cfg")) << "synth=ar1\nlearning_rate=0.1\n";
  r = run({"train", "--config", path("bad.cfg")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos);

  r = run({"train", "--synth", "lagged_mean", "--model", "sig_gru", "--proj", "7"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("proj"), std::string::npos);

  r = run({"train", "--synth", "lagged_mean", "--data", "x.csv"});
  EXPECT_EQ(r.code, 1);

  r = run({});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  Result r = run({"train", "--data", path("missing.csv"), "--out_dir", path("runs")});
  EXPECT_EQ(r.code, 2);
  std::ofstream(path("short.csv")) << "timestamp,a\n1,1\n2,2\n3,3\n";
  r = run({"train", "--data", path("short.csv"), "--task", "minmax", "--out_dir", path("runs")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("rows are required"), std::string::npos) << r.err;
}

TEST_F(CliTest, HelpListsConfigKeys) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const auto& k : cli::config_keys()) EXPECT_NE(r.out.find(std::string("  ") + k.name + " ["), std::string::npos);
}

TEST_F(CliTest, EvalReproducesTheRecordedTestR2) {
  ASSERT_EQ(run(small_train("runs")).code, 0);
  const auto dir = run_dirs("runs").front();
  const auto m = lines(slurp(dir / "metrics.csv"));
  std::vector<std::string> fields;
  std::stringstream row(m[1]);
  for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
  const std::vector<std::string> args{"eval", "--checkpoint", (dir / "model.ckpt").string(), "--config",
                                      (dir / "config.txt").string()};
  const Result a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto out = lines(a.out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1], "test," + fields[3] + "," + fields[4]);
  EXPECT_EQ(run(args).out, a.out);
  EXPECT_EQ(slurp(dir / "eval-test.csv"), a.out);
}

TEST_F(CliTest, EvalRejectsBrokenOrMismatchedCheckpoints) {
  ASSERT_EQ(run(small_train("runs")).code, 0);
  const auto dir = run_dirs("runs").front();
  const std::string bytes = slurp(dir / "model.ckpt");
  std::ofstream(path("cut.ckpt"), std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  Result r = run({"eval", "--checkpoint", path("cut.ckpt"), "--config", (dir / "config.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;

  r = run({"eval", "--checkpoint", (dir / "model.ckpt").string(), "--config", (dir / "config.txt").string(),
           "--horizon", "15", "--synth_n", "600"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("mismatch"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalOnAnOverfitTrainingSplit) {
  {
    std::ofstream f(path("sine.csv"));
    f << "timestamp,target,phase\n" << std::setprecision(17);
    for (int i = 0; i < 400; ++i) {
      const double a = 2.0 * M_PI * i / 24.0;
      f << 1000 + 3600 * i << "," << std::sin(a) << "," << std::cos(a) << "\n";
    }
  }
  Result r = run({"train", "--data", path("sine.csv"), "--task", "minmax", "--model", "gru", "--hidden", "8",
                  "--batch_size", "32", "--lr", "1e-2", "--max_epochs", "100", "--out_dir", path("runs")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dir = run_dirs("runs").front();
  r = run({"eval", "--checkpoint", (dir / "model.ckpt").string(), "--config", (dir / "config.txt").string(),
           "--split", "train", "--out", path("train.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  EXPECT_GT(std::stod(out[1].substr(6)), 0.99);
}

TEST_F(CliTest, GradcheckPassesAndListsEveryBlockOnce) {
  const Result r = run({"gradcheck", "sig_lstm", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Model m(parse_variant("sig_lstm", 4, 6, 3, 3, false), 3);
  const auto out = lines(r.out);
  for (const auto& b : m.params()) {
    EXPECT_EQ(std::count_if(out.begin(), out.end(), [&](const std::string& l) { return l.rfind(b.name + ",", 0) == 0; }),
              1)
        << b.name;
  }
  for (const char* v : {"lstm", "gru", "sig_gru", "sig_gru-3-2"}) EXPECT_EQ(run({"gradcheck", v}).code, 0) << v;
}

TEST_F(CliTest, GradcheckDetectsACorruptedGradient) {
  const Result r = run({"gradcheck", "sig_gru", "--seed", "2", "--corrupt-block", "layer0.W_sig"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("layer0.W_sig"), std::string::npos) << r.err;
  EXPECT_EQ(run({"gradcheck", "sig_gru", "--corrupt-block", "nope"}).code, 1);
}

TEST_F(CliTest, SigdumpClosedFormAndGuards) {
  std::ofstream(path("p.csv")) << "timestamp,a\n1,0\n2,1\n3,3\n";
  Result r = run({"sigdump", "--csv", path("p.csv"), "--depth", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 1u + 3 * 2);
  EXPECT_EQ(out[0], "t,level,index,value");
  EXPECT_EQ(out[3], "2,1,0,0.5");
  EXPECT_EQ(out[4], "2,2,0,0.25");
  EXPECT_EQ(out[5], "3,1,0,1");
  EXPECT_EQ(out[6], "3,2,0,1.5");
  r = run({"sigdump", "--csv", path("p.csv"), "--depth", "2", "--no-normalize"});
  EXPECT_EQ(lines(r.out)[3], "2,1,0,1");
  EXPECT_EQ(lines(r.out)[4], "2,2,0,0.5");

  EXPECT_EQ(run({"sigdump", "--csv", path("p.csv"), "--depth", "5"}).code, 1);
  EXPECT_EQ(run({"sigdump", "--csv", path("nope.csv")}).code, 2);
}

TEST_F(CliTest, SigdumpShapeAndConstantColumns) {
  {
    std::ofstream f(path("c.csv"));
    f << "timestamp,a,b,c\n";
    for (int i = 0; i < 7; ++i) f << i << ",2.5,-1,4\n";
  }
  const Result r = run({"sigdump", "--csv", path("c.csv"), "--depth", "3", "--proj", "5", "--out", path("s.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(slurp(path("s.csv")));
  EXPECT_EQ(out.size(), 1 + 7 * sig_dim(5, 3));
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_EQ(out[i].substr(out[i].rfind(',') + 1), "0") << out[i];
}

TEST_F(CliTest, BenchHasOneRowPerVariant) {
  const Result r = run({"bench", "--variants", "gru,sig_gru-2", "--epochs", "1", "--synth", "lagged_mean", "--synth_n",
                        "300", "--hidden", "4", "--batch_size", "32", "--out", path("bench.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(slurp(path("bench.csv")));
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[1].substr(0, 4), "gru,");
  EXPECT_EQ(csv[2].substr(0, 10), "sig_gru-2,");
  EXPECT_NE(r.out.find("| sig_gru-2 |"), std::string::npos);
}

}  // namespace
}  // namespace sigrnn
