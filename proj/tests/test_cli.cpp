#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "faqpilot/cli.hpp"
#include "faqpilot/csv.hpp"
#include "faqpilot/simulator.hpp"

using namespace faqpilot;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<csv::Row> rows_of(const std::string& text) {
  std::istringstream in(text);
  csv::Reader reader(in);
  std::vector<csv::Row> rows;
  while (auto r = reader.next()) rows.push_back(*r);
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("faqpilot_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  std::string write(const std::string& name, const std::string& body) const {
    std::ofstream(dir / name, std::ios::binary) << body;
    return path(name);
  }

  std::string small_corpus(std::size_t calls = 10) const {
    const auto intents = write("intents.csv",
                               "question,frequency\n"
                               "How do I reset my router?,8\n"
                               "Why is my bill so high?,6\n"
                               "Can I upgrade my plan online?,4\n");
    const auto out = path("calls.jsonl");
    EXPECT_EQ(cli({"synth", "--calls", std::to_string(calls), "--intents", intents, "--seed", "7", "--out", out}).code,
              0);
    return out;
  }

  fs::path dir;
};

struct Case {
  std::vector<std::string> args;
  int code;
  std::string out_contains;
  std::string err_contains;
};

}  // namespace

TEST_F(Cli, ExitCodeTable) {
  const auto bad_json = write("bad.json", "{ not json");
  const auto unknown_key = write("unknown.json", R"({"engine": {"trigger_intervall": 4}})");
  const auto calls = small_corpus();
  const std::vector<Case> cases{
      {{}, kExitUsage, "", "subcommand"},
      {{"--help"}, kExitOk, "serve", ""},
      {{"mine", "--help"}, kExitOk, "--k", ""},
      {{"teleport"}, kExitUsage, "", ""},
      {{"synth"}, kExitUsage, "", "--out"},
      {{"synth", "--out", path("x.jsonl"), "--frobnicate"}, kExitUsage, "", ""},
      {{"synth", "--calls", "0", "--out", path("x.jsonl")}, kExitUsage, "", ""},
      {{"synth", "--noise", "1.5", "--out", path("x.jsonl")}, kExitUsage, "", ""},
      {{"synth", "--calls", "2", "--max-questions", "1", "--out", path("x.jsonl")}, kExitFailure, "", "infeasible"},
      {{"replay", "--transcripts", calls, "--policy", "sometimes"}, kExitUsage, "", ""},
      {{"replay", "--transcripts", calls, "--trigger", "every:0"}, kExitUsage, "", ""},
      {{"compare", "--transcripts", calls, "--profile", "a:psychic:0"}, kExitUsage, "", ""},
      {{"replay", "--transcripts", path("missing.jsonl")}, kExitFailure, "", "faqpilot:"},
      {{"serve", "--config", bad_json, "--check"}, kExitFailure, "", "invalid-config"},
      {{"serve", "--config", unknown_key}, kExitFailure, "", "trigger_intervall"},
      {{"serve", "--config", path("absent.json")}, kExitFailure, "", "invalid-config"},
      {{"serve", "--port", "70000"}, kExitUsage, "", ""},
      {{"faq-export", "--store", path("none.bin"), "--csv", path("o.csv")}, kExitFailure, "", "storage-io"},
      {{"faq-import", "--csv", path("o.csv")}, kExitFailure, "", "--store"},
      {{"mine", "--in", calls, "--k", "0"}, kExitUsage, "", ""},
  };
  for (const auto& c : cases) {
    std::string joined;
    for (const auto& a : c.args) joined += a + " ";
    const auto r = cli(c.args);
    EXPECT_EQ(r.code, c.code) << joined << "\n" << r.err;
    EXPECT_NE(r.out.find(c.out_contains), std::string::npos) << joined << "\n" << r.out;
    EXPECT_NE(r.err.find(c.err_contains), std::string::npos) << joined << "\n" << r.err;
  }
}

TEST_F(Cli, ServeCheckNeedsTokensFromEnvironment) {
  ::unsetenv("FAQPILOT_AGENT_TOKEN");
  ::unsetenv("FAQPILOT_SUPERVISOR_TOKEN");
  auto r = cli({"serve", "--scripted", "--check"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("FAQPILOT_AGENT_TOKEN"), std::string::npos);

  ::setenv("FAQPILOT_AGENT_TOKEN", "agent-secret-value", 1);
  ::setenv("FAQPILOT_SUPERVISOR_TOKEN", "supervisor-secret-value", 1);
  r = cli({"serve", "--scripted", "--check", "--port", "0"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.find("secret-value"), std::string::npos);
  EXPECT_EQ(r.err.find("secret-value"), std::string::npos);
  ::unsetenv("FAQPILOT_AGENT_TOKEN");
  ::unsetenv("FAQPILOT_SUPERVISOR_TOKEN");
}

TEST_F(Cli, SynthIsDeterministic) {
  const auto a = path("a.jsonl"), b = path("b.jsonl"), c = path("c.jsonl");
  ASSERT_EQ(cli({"synth", "--calls", "400", "--seed", "7", "--out", a}).code, 0);
  ASSERT_EQ(cli({"synth", "--calls", "400", "--seed", "7", "--out", b}).code, 0);
  ASSERT_EQ(cli({"synth", "--calls", "400", "--seed", "8", "--out", c}).code, 0);
  EXPECT_FALSE(slurp(a).empty());
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
}

TEST_F(Cli, ReplayRunsTranscriptsTimesReps) {
  const auto calls = small_corpus(10);
  const auto faqs = write("faqs.csv", std::string(kCsvHeader) +
                                          "\nq1,How do I reset my router?,Hold the button.,5,mined,0,0\n");
  const auto report = path("report.csv");
  auto r = cli({"replay", "--transcripts", calls, "--faqs", faqs, "--reps", "10", "--format", "csv", "--report", report,
                "--seed", "3", "--scripted"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(slurp(report));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][1], "runs");
  EXPECT_EQ(rows[1][1], "100");

  const auto again = path("again.csv");
  ASSERT_EQ(cli({"replay", "--transcripts", calls, "--faqs", faqs, "--reps", "10", "--format", "csv", "--report",
                 again, "--seed", "3", "--scripted"})
                .code,
            0);
  EXPECT_EQ(slurp(report), slurp(again));
}

TEST_F(Cli, CompareDefaultsToThreeProfiles) {
  const auto calls = small_corpus(6);
  auto r = cli({"compare", "--transcripts", calls, "--format", "csv", "--scripted"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][0], "vector_only");
  EXPECT_EQ(rows[2][0], "parallel_small");
  EXPECT_EQ(rows[3][0], "serial_large");

  r = cli({"compare", "--transcripts", calls, "--profile", "a:vector_only:0", "--profile", "b:llm_rerank:100"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("profile", 0), 0u);
  r = cli({"compare", "--transcripts", calls, "--profile", "a:vector_only:0"});
  EXPECT_EQ(r.code, kExitFailure);
}

TEST_F(Cli, FaqImportExportRoundTrip) {
  const auto store = path("faq.bin");
  const auto in = write("in.csv", std::string(kCsvHeader) +
                                      "\nq1,How do I reset my router?,Hold the button.,5,mined,10,20\n"
                                      "q2,\"Fees, and charges?\",,2,supervisor,30,40\n");
  auto r = cli({"faq-import", "--csv", in, "--store", store});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("imported 2"), std::string::npos);

  const auto out = path("out.csv");
  r = cli({"faq-export", "--store", store, "--csv", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(out), slurp(in));

  const auto bad = write("bad.csv", std::string(kCsvHeader) + "\nq3,Ok?,,1,mined,0,0\nq4,,,x,mined,0,0\n");
  r = cli({"faq-import", "--csv", bad, "--store", store});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  r = cli({"faq-export", "--store", store, "--csv", out});
  EXPECT_NE(slurp(out).find("q3,Ok?"), std::string::npos);
}

TEST_F(Cli, MineOffline) {
  const auto calls = small_corpus(30);
  const auto out = path("faqs.csv");
  const auto report = path("report.json");
  auto r = cli({"mine", "--in", calls, "--k", "5", "--top", "3", "--scripted", "--seed", "1", "--out", out, "--report",
                report, "--cache-dir", path("cache")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("critic batches"), std::string::npos);
  const auto rows = rows_of(slurp(out));
  EXPECT_EQ(rows.size(), 4u);
  EXPECT_FALSE(slurp(report).empty());
}
