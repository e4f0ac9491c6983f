#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "faqpilot/error.hpp"
#include "faqpilot/faq_store.hpp"
#include "support/generators.hpp"

using namespace faqpilot;
using faqpilot::testing::Gen;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Embedder> embedder(std::size_t dim = 64) { return std::make_shared<DeterministicEmbedder>(dim, 0); }

StoreConfig cfg(std::size_t dim = 64) {
  StoreConfig c;
  c.dim = dim;
  c.now_ms = [] { return std::int64_t{1000}; };
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("faqpilot_store_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidConfig;
}

FaqUpsert q(std::string text, std::optional<std::string> answer = std::nullopt) {
  FaqUpsert f;
  f.question = std::move(text);
  f.answer = std::move(answer);
  return f;
}

}  // namespace

TEST(FaqStore, CrudRoundTrip) {
  FaqStore store(cfg(), embedder());
  const auto id = store.upsert(q("How do I reset my router?", "Hold the reset button."));
  auto e = store.get(id);
  EXPECT_EQ(e.question, "How do I reset my router?");
  EXPECT_EQ(e.answer, "Hold the reset button.");
  EXPECT_EQ(e.source, FaqSource::Supervisor);
  EXPECT_EQ(e.embedding, embedder()->embed("How do I reset my router?"));

  FaqUpsert edit;
  edit.qid = id;
  edit.frequency = 7;
  store.upsert(edit);
  e = store.get(id);
  EXPECT_EQ(e.frequency, 7u);
  EXPECT_EQ(e.answer, "Hold the reset button.");

  edit = {};
  edit.qid = id;
  edit.clear_answer = true;
  store.upsert(edit);
  EXPECT_FALSE(store.get(id).answer);

  EXPECT_TRUE(store.remove(id));
  EXPECT_FALSE(store.remove(id));
  EXPECT_EQ(code_of([&] { (void)store.get(id); }), ErrorCode::NotFound);
}

TEST(FaqStore, ReembedsOnlyWhenQuestionChanges) {
  FaqStore store(cfg(), embedder());
  const auto id = store.upsert(q("Where is my bill?"));
  FaqUpsert edit;
  edit.qid = id;
  edit.question = "When is my bill due?";
  store.upsert(edit);
  EXPECT_EQ(store.get(id).embedding, embedder()->embed("When is my bill due?"));
}

TEST(FaqStore, InputValidation) {
  FaqStore store(cfg(), embedder());
  EXPECT_EQ(code_of([&] { store.upsert(q("   ")); }), ErrorCode::EmptyText);
  EXPECT_EQ(code_of([&] { store.upsert(FaqUpsert{}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { (void)store.search(Vector(64, 0.1), 0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { (void)store.search(Vector(3, 0.1), 1); }), ErrorCode::DimMismatch);
  EXPECT_EQ(code_of([&] { FaqStore bad(cfg(32), embedder(64)); }), ErrorCode::DimMismatch);
}

TEST(FaqStoreProperty, SearchMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Gen g(seed);
    FaqStore store(cfg(), embedder());
    const auto n = g.range(0, 60);
    for (std::size_t i = 0; i < n; ++i) store.upsert(q(g.question() + " " + std::to_string(g.index(5))));
    const auto query = embedder()->embed(g.question());
    const auto k = g.range(1, 12);
    const double min_score = g.coin(0.5) ? -1.0 : g.uniform(-0.2, 0.6);

    std::vector<FaqMatch> oracle;
    for (const auto& e : store.entries()) {
      double s = 0.0;
      for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * e.embedding[d];
      if (s >= min_score) oracle.push_back({e.qid, e.question, s});
    }
    std::sort(oracle.begin(), oracle.end(), [](const FaqMatch& a, const FaqMatch& b) {
      return a.score != b.score ? a.score > b.score : a.qid < b.qid;
    });
    if (oracle.size() > k) oracle.resize(k);

    const auto got = store.search(query, k, min_score);
    ASSERT_EQ(got.size(), oracle.size()) << seed;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].qid, oracle[i].qid) << seed;
      EXPECT_NEAR(got[i].score, oracle[i].score, 1e-9);
    }
  }
}

TEST(FaqStore, TagRuntimeDeduplicatesNearCopies) {
  FaqStore store(cfg(), embedder());
  auto first = store.tag_runtime("How do I cancel my plan?", "Call us.");
  EXPECT_FALSE(first.merged);
  EXPECT_EQ(store.get(first.qid).source, FaqSource::RuntimeTagged);
  EXPECT_EQ(store.get(first.qid).frequency, 1u);
  auto again = store.tag_runtime("  how do I cancel my plan? ", "Call us.");
  EXPECT_TRUE(again.merged);
  EXPECT_EQ(again.qid, first.qid);
  EXPECT_EQ(store.get(first.qid).frequency, 2u);
  EXPECT_FALSE(store.tag_runtime("What is the roaming fee in Spain?", "5 a day.").merged);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(code_of([&] { store.tag_runtime("q?", " "); }), ErrorCode::EmptyText);
}

TEST(FaqStore, ListPaginatesAndFiltersAnswerless) {
  FaqStore store(cfg(), embedder());
  for (int i = 0; i < 25; ++i) {
    store.upsert(q("question number " + std::to_string(i),
                   i % 2 ? std::optional<std::string>("a") : std::nullopt));
  }
  auto p = store.list(20, 10, false);
  EXPECT_EQ(p.total, 25u);
  EXPECT_EQ(p.entries.size(), 5u);
  auto ans = store.list(0, 100, true);
  EXPECT_EQ(ans.total, 13u);
  for (const auto& e : ans.entries) EXPECT_FALSE(e.answer);
  auto all = store.entries();
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end(), [](auto& a, auto& b) { return a.qid < b.qid; }));
}

TEST(FaqStore, CsvExportImportRoundTrip) {
  TempDir dir("csv");
  FaqStore a(cfg(), embedder());
  Gen g(5);
  for (int i = 0; i < 30; ++i) {
    FaqUpsert f = q(g.awkward_text(20) + "?" + std::to_string(i), g.coin(0.5) ? std::optional(g.awkward_text(30)) : std::nullopt);
    f.frequency = g.range(0, 100);
    f.source = g.coin(0.5) ? FaqSource::Mined : FaqSource::Supervisor;
    a.upsert(f);
  }
  EXPECT_EQ(a.export_csv(dir.path / "faq.csv"), 30u);
  FaqStore b(cfg(), embedder());
  auto r = b.import_csv(dir.path / "faq.csv");
  EXPECT_EQ(r.count, 30u);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(a.entries(), b.entries());
}

TEST(FaqStore, CsvImportReportsLineNumbers) {
  TempDir dir("csvbad");
  write_all(dir.path / "in.csv", std::string(kCsvHeader) +
                                     "\n"
                                     "F1,Good question?,,3,supervisor,,\n"
                                     "F2,,answer,1,mined,,\n"
                                     "F3,\"multi\nline?\",a,x,mined,,\n"
                                     "F4,Wrong width?,a\n"
                                     "F5,Bad source?,a,1,martian,,\n"
                                     "F6,Fine?,a,2,mined,5,6\n");
  FaqStore store(cfg(), embedder());
  auto r = store.import_csv(dir.path / "in.csv");
  EXPECT_EQ(r.count, 2u);
  ASSERT_EQ(r.errors.size(), 4u);
  EXPECT_EQ(r.errors[0].line, 3u);
  EXPECT_EQ(r.errors[1].line, 4u);
  EXPECT_EQ(r.errors[2].line, 6u);
  EXPECT_EQ(r.errors[3].line, 7u);
  EXPECT_EQ(store.get("F6").created_at_ms, 5);

  write_all(dir.path / "nohdr.csv", "qid,question\n");
  EXPECT_EQ(code_of([&] { store.import_csv(dir.path / "nohdr.csv"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(code_of([&] { store.import_csv(dir.path / "missing.csv"); }), ErrorCode::StorageIo);
}

TEST(FaqStore, SnapshotErrors) {
  TempDir dir("snap");
  FaqStore store(cfg(), embedder());
  store.upsert(q("Why is my bill high?", "Roaming."));
  const auto path = dir.path / "s.bin";
  store.persist(path);
  const auto good = read_all(path);

  auto bad = good;
  bad[8] = 9;  // version field
  write_all(path, bad);
  EXPECT_EQ(code_of([&] { store.load(path); }), ErrorCode::VersionMismatch);

  bad = good;
  bad[bad.size() / 2] ^= 0x5a;
  write_all(path, bad);
  EXPECT_EQ(code_of([&] { store.load(path); }), ErrorCode::CorruptSnapshot);

  write_all(path, good.substr(0, good.size() - 3));
  EXPECT_EQ(code_of([&] { store.load(path); }), ErrorCode::CorruptSnapshot);

  write_all(path, "not a snapshot");
  EXPECT_EQ(code_of([&] { store.load(path); }), ErrorCode::CorruptSnapshot);

  write_all(path, good);
  FaqStore other(cfg(32), embedder(32));
  EXPECT_EQ(code_of([&] { other.load(path); }), ErrorCode::DimMismatch);
  EXPECT_EQ(store.size(), 1u);
}

TEST(FaqStoreProperty, RandomMutationsSurvivePersistence) {
  TempDir dir("mut");
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Gen g(seed);
    auto c = cfg();
    c.snapshot_path = dir.path / ("auto" + std::to_string(seed) + ".bin");
    FaqStore store(c, embedder());
    std::vector<std::string> ids;
    for (int i = 0; i < 500; ++i) {
      const auto op = g.index(10);
      if (op < 5 || ids.empty()) {
        ids.push_back(store.upsert(q(g.question() + " " + std::to_string(i), g.awkward_text(16))));
      } else if (op < 8) {
        FaqUpsert f;
        f.qid = ids[g.index(ids.size())];
        f.frequency = g.range(0, 1000);
        if (g.coin(0.3)) f.question = g.awkward_text(24) + "?";
        if (store.find(*f.qid)) store.upsert(f);
      } else if (op < 9) {
        store.remove(ids[g.index(ids.size())]);
      } else {
        store.tag_runtime(g.question(), "tagged answer");
      }
    }
    const auto path = dir.path / ("explicit" + std::to_string(seed) + ".bin");
    store.persist(path);
    FaqStore loaded(cfg(), embedder());
    loaded.load(path);
    EXPECT_EQ(loaded.entries(), store.entries()) << seed;

    auto reopened = FaqStore::open(c, embedder());
    EXPECT_EQ(reopened->entries(), store.entries()) << seed;
  }
}

TEST(FaqStore, ConcurrentReadsDuringWrites) {
  FaqStore store(cfg(), embedder());
  for (int i = 0; i < 50; ++i) store.upsert(q("seed question " + std::to_string(i)));
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (int i = 0; i < 200; ++i) store.upsert(q("new question " + std::to_string(i)));
    stop = true;
  });
  const auto query = embedder()->embed("question");
  std::size_t reads = 0;
  while (!stop) {
    auto r = store.search(query, 5);
    ASSERT_EQ(r.size(), 5u);
    ++reads;
  }
  writer.join();
  EXPECT_GT(reads, 0u);
  EXPECT_EQ(store.size(), 250u);
}
