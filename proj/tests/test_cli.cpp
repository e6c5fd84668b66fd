// Copyright 2026 The portscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the installed command-line binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include "support.hpp"

namespace portscope {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int status;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("portscope_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    std::string cmd = std::string(PORTSCOPE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                      err.string();
    int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, testing::slurp(out.string()),
            testing::slurp(err.string())};
  }

  fs::path dir_;
};

TEST_F(Cli, AnalyzeSkylakeTriad) {
  auto r = run("analyze --arch skl " + testing::kernel_path("triad_o3_skl"));
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("Total throughput: 2.00 cy per assembly iteration, bottleneck: P2, P3"),
            std::string::npos)
      << r.out;
  EXPECT_TRUE(r.err.empty()) << r.err;
}

TEST_F(Cli, AnalyzeZenTriadShowsHiddenLoad) {
  auto r = run("analyze --arch zen " + testing::kernel_path("triad_o3_zen"));
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("(0.50)  (0.50)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("2.00 cy per assembly iteration, bottleneck: P8, P9"), std::string::npos);
}

TEST_F(Cli, AnalyzeIsByteIdenticalAcrossRuns) {
  for (const char* args : {"analyze --arch skl ", "analyze --machine-readable --arch skl "}) {
    auto a = run(args + testing::kernel_path("pi_o3_skl"));
    auto b = run(args + testing::kernel_path("pi_o3_skl"));
    EXPECT_EQ(a.out, b.out);
  }
}

TEST_F(Cli, ModelFlagOverridesArch) {
  auto r = run("analyze --arch zen --model " + std::string(PORTSCOPE_MODEL_DIR) + "/skl.model " +
               testing::kernel_path("triad_o3_skl"));
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("2.00 cy per assembly iteration"), std::string::npos);
}

TEST_F(Cli, UnmatchedFormsWriteBenchmarksAndExitTwo) {
  auto gen = dir_ / "gen";
  auto r = run("analyze --arch skl --out-dir " + gen.string() + " " +
               testing::kernel_path("unknown_form"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("no model entry for: vshufpd-ymm_ymm_ymm_imm vsqrtpd-ymm_ymm"),
            std::string::npos)
      << r.err;
  for (const char* f : {"vsqrtpd-ymm_ymm-latency-1.s", "vsqrtpd-ymm_ymm-throughput-10.s",
                        "vshufpd-ymm_ymm_ymm_imm-latency-1.s",
                        "vshufpd-ymm_ymm_ymm_imm-throughput-10.s"}) {
    EXPECT_TRUE(fs::exists(gen / f)) << f;
  }
  auto lat = testing::slurp((gen / "vsqrtpd-ymm_ymm-latency-1.s").string());
  EXPECT_NE(lat.find("\tvsqrtpd\t%ymm0, %ymm0\n"), std::string::npos);
}

TEST_F(Cli, NoBenchmarksFlag) {
  auto gen = dir_ / "gen";
  auto r = run("analyze --arch skl --no-benchmarks --out-dir " + gen.string() + " " +
               testing::kernel_path("unknown_form"));
  EXPECT_EQ(r.status, 2);
  EXPECT_FALSE(fs::exists(gen));
}

TEST_F(Cli, ErrorsExitOne) {
  EXPECT_EQ(run("analyze --arch nope " + testing::kernel_path("triad_o3_skl")).status, 1);
  EXPECT_EQ(run("analyze --arch skl " + (dir_ / "missing.s").string()).status, 1);
  EXPECT_EQ(run("analyze --bogus-flag x.s").status, 1);
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("simulate --arch skl " + testing::kernel_path("unknown_form")).status, 1);
  EXPECT_EQ(run("benchgen not-a-form!_x latency").status, 1);
  EXPECT_EQ(run("benchgen vaddpd-xmm_xmm_xmm sideways").status, 1);
  auto r = run("analyze --arch nope " + testing::kernel_path("triad_o3_skl"));
  EXPECT_NE(r.err.find("unknown arch 'nope'"), std::string::npos);
}

TEST_F(Cli, MarkerErrorReported) {
  auto file = dir_ / "plain.s";
  std::ofstream(file) << "\taddl $1, %eax\n";
  auto r = run("analyze --arch skl " + file.string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("start marker not found"), std::string::npos);
}

TEST_F(Cli, Simulate) {
  auto r = run("simulate --arch skl --simulate-iterations 1000 " +
               testing::kernel_path("pi_o2_skl"));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "4.2500 cy per assembly iteration\n");
  auto ll = run("simulate --arch skl --policy least-loaded " + testing::kernel_path("pi_o2_skl"));
  EXPECT_EQ(ll.out, "4.0000 cy per assembly iteration\n");
  EXPECT_EQ(run("simulate --arch skl --policy random " + testing::kernel_path("pi_o2_skl")).status,
            1);
}

TEST_F(Cli, Benchgen) {
  auto r = run("benchgen vfmadd132pd-xmm_xmm_mem conflict --with vmulpd-xmm_xmm_xmm "
               "--parallelism 4 --out-dir " + dir_.string());
  EXPECT_EQ(r.status, 0) << r.err;
  auto path = dir_ / "vfmadd132pd-xmm_xmm_mem+vmulpd-xmm_xmm_xmm-conflict-4.s";
  EXPECT_EQ(r.out, path.string() + "\n");
  InstructionForm a{"vfmadd132pd", {OperandClass::kMem, OperandClass::kXmm, OperandClass::kXmm}};
  InstructionForm b{"vmulpd", {OperandClass::kXmm, OperandClass::kXmm, OperandClass::kXmm}};
  EXPECT_EQ(testing::slurp(path.string()), gen_conflict_kernel(a, b, 4).asm_text);
}

TEST_F(Cli, IngestProposesListedEntry) {
  auto r = run("ingest --arch zen --groups 'P0|P1:1;P8|P9:1' " + testing::data_path("zen_fma.log"));
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("  conflicts: vmulpd\n  no conflict: vaddpd\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("vfmadd132pd-xmm_xmm_mem, 0.5, 5.0, \\\n\t\t  "
                       "\"(0.5,0.5,0,0,0,0,0,0,0,0.5,0.5)\"\n"),
            std::string::npos)
      << r.out;
  EXPECT_NE(r.err.find("vfmadd132pd-xmm_xmm_xmm: no latency sample"), std::string::npos);
}

TEST_F(Cli, IngestWithoutModelSkipsConflicts) {
  auto r = run("ingest " + testing::data_path("skl_fma.log"));
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("latency 4.0 cy (measured 4.009), reciprocal throughput 0.5 cy/instr "
                       "(measured 0.553), ports 2"),
            std::string::npos)
      << r.out;
}

}  // namespace
}  // namespace portscope
