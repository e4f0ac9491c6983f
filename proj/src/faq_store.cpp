#include "faqpilot/faq_store.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "faqpilot/csv.hpp"
#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"
#include "fs_util.hpp"

namespace faqpilot {

std::string_view to_string(FaqSource s) noexcept {
  switch (s) {
    case FaqSource::Mined: return "mined";
    case FaqSource::RuntimeTagged: return "runtime_tagged";
    case FaqSource::Supervisor: return "supervisor";
  }
  return "supervisor";
}

FaqSource parse_faq_source(std::string_view s) {
  if (s == "mined") return FaqSource::Mined;
  if (s == "runtime_tagged") return FaqSource::RuntimeTagged;
  if (s == "supervisor") return FaqSource::Supervisor;
  throw Error(ErrorCode::InvalidArgument, "unknown FAQ source '" + std::string(s) + "'");
}

namespace {

constexpr char kMagic[8] = {'F', 'A', 'Q', 'P', 'S', 'N', 'A', 'P'};

// Little-endian binary encoder that keeps a running FNV-1a checksum.
class SnapshotWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  template <typename T>
  void pod(T v) {
    static_assert(std::endian::native == std::endian::little, "snapshot format assumes little-endian");
    bytes(&v, sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  std::string finish() {
    const std::uint64_t sum = text::fnv1a64(buf_);
    pod(sum);
    return std::move(buf_);
  }

 private:
  std::string buf_;
};

class SnapshotReader {
 public:
  explicit SnapshotReader(std::string data) : data_(std::move(data)) {}

  void bytes(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw Error(ErrorCode::CorruptSnapshot, "snapshot is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > data_.size() - pos_) throw Error(ErrorCode::CorruptSnapshot, "snapshot is truncated");
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void verify_checksum() {
    const std::size_t body = pos_;
    const auto stored = pod<std::uint64_t>();
    if (stored != text::fnv1a64(std::string_view(data_).substr(0, body))) {
      throw Error(ErrorCode::CorruptSnapshot, "snapshot checksum mismatch");
    }
    if (pos_ != data_.size()) throw Error(ErrorCode::CorruptSnapshot, "trailing bytes after snapshot");
  }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

std::string encode_snapshot(const std::vector<FaqEntry>& sorted, std::size_t dim) {
  SnapshotWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kSnapshotFormatVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.pod<std::uint64_t>(sorted.size());
  for (const auto& e : sorted) {
    w.str(e.qid);
    w.str(e.question);
    w.pod<std::uint8_t>(e.answer ? 1 : 0);
    w.str(e.answer.value_or(""));
    w.pod<std::uint64_t>(e.frequency);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.source));
    w.pod<std::int64_t>(e.created_at_ms);
    w.pod<std::int64_t>(e.updated_at_ms);
    for (double x : e.embedding) w.pod(x);
  }
  return w.finish();
}

bool less_match(const FaqMatch& a, const FaqMatch& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.qid < b.qid;
}

}  // namespace

FaqStore::FaqStore(StoreConfig config, std::shared_ptr<const Embedder> embedder)
    : config_(std::move(config)), embedder_(std::move(embedder)), id_rng_(config_.id_seed) {
  if (!embedder_) throw Error(ErrorCode::InvalidConfig, "store needs an embedder");
  if (embedder_->dim() != config_.dim) {
    throw Error(ErrorCode::DimMismatch, "embedder dim " + std::to_string(embedder_->dim()) +
                                            " != store dim " + std::to_string(config_.dim));
  }
  if (!(config_.dedup_threshold > 0.0 && config_.dedup_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dedup threshold must lie in (0, 1]");
  }
}

std::unique_ptr<FaqStore> FaqStore::open(StoreConfig config, std::shared_ptr<const Embedder> embedder) {
  auto store = std::make_unique<FaqStore>(std::move(config), std::move(embedder));
  if (store->config_.snapshot_path && std::filesystem::exists(*store->config_.snapshot_path)) {
    store->load(*store->config_.snapshot_path);
  }
  return store;
}

std::int64_t FaqStore::now() const {
  if (config_.now_ms) return config_.now_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string FaqStore::mint_qid(FaqSource source) {
  static constexpr char kAlphabet[] = "0123456789abcdefghijklmnopqrstuvwxyz";
  const std::string prefix = source == FaqSource::RuntimeTagged ? "rt_" : source == FaqSource::Mined ? "mq_" : "sv_";
  for (;;) {
    std::string id = prefix;
    for (int i = 0; i < 8; ++i) id += kAlphabet[id_rng_() % 36];
    if (!index_.count(id)) return id;
  }
}

void FaqStore::insert_locked(FaqEntry entry) {
  index_.emplace(entry.qid, entries_.size());
  entries_.push_back(std::move(entry));
}

std::vector<FaqEntry> FaqStore::sorted_copy_locked() const {
  auto copy = entries_;
  std::sort(copy.begin(), copy.end(), [](const FaqEntry& a, const FaqEntry& b) { return a.qid < b.qid; });
  return copy;
}

void FaqStore::autopersist_locked() const {
  if (!config_.snapshot_path) return;
  detail::write_file_atomic(*config_.snapshot_path, encode_snapshot(sorted_copy_locked(), config_.dim));
}

std::string FaqStore::upsert(const FaqUpsert& f) {
  if (f.question && text::is_blank(*f.question)) throw Error(ErrorCode::EmptyText, "question is empty");

  // Embed outside the lock; embedding may be a network call.
  std::optional<Vector> fresh;
  if (f.question) {
    bool needs_embedding = true;
    if (f.qid) {
      std::shared_lock lock(mu_);
      if (auto it = index_.find(*f.qid); it != index_.end()) {
        needs_embedding = entries_[it->second].question != *f.question;
      }
    }
    if (needs_embedding) fresh = embedder_->embed(*f.question);
  }

  std::unique_lock lock(mu_);
  const auto ts = now();
  auto it = f.qid ? index_.find(*f.qid) : index_.end();
  std::string qid;
  if (it == index_.end()) {
    if (!f.question) throw Error(ErrorCode::InvalidArgument, "question is required for a new entry");
    FaqEntry e;
    e.source = f.source.value_or(FaqSource::Supervisor);
    e.qid = f.qid ? *f.qid : mint_qid(e.source);
    if (text::is_blank(e.qid)) e.qid = mint_qid(e.source);
    e.question = *f.question;
    if (f.answer && !f.answer->empty() && !f.clear_answer) e.answer = *f.answer;
    e.frequency = f.frequency.value_or(0);
    e.embedding = fresh ? std::move(*fresh) : embedder_->embed(e.question);
    e.created_at_ms = f.created_at_ms.value_or(ts);
    e.updated_at_ms = f.updated_at_ms.value_or(ts);
    qid = e.qid;
    insert_locked(std::move(e));
  } else {
    FaqEntry& e = entries_[it->second];
    if (f.question && *f.question != e.question) {
      // Text may have changed between the unlocked check and now.
      e.embedding = fresh ? std::move(*fresh) : embedder_->embed(*f.question);
      e.question = *f.question;
    }
    if (f.clear_answer) {
      e.answer.reset();
    } else if (f.answer) {
      if (f.answer->empty()) e.answer.reset();
      else e.answer = *f.answer;
    }
    if (f.frequency) e.frequency = *f.frequency;
    if (f.source) e.source = *f.source;
    if (f.created_at_ms) e.created_at_ms = *f.created_at_ms;
    e.updated_at_ms = f.updated_at_ms.value_or(ts);
    qid = e.qid;
  }
  autopersist_locked();
  return qid;
}

bool FaqStore::remove(const std::string& qid) {
  std::unique_lock lock(mu_);
  auto it = index_.find(qid);
  if (it == index_.end()) return false;
  const std::size_t pos = it->second;
  index_.erase(it);
  if (pos != entries_.size() - 1) {
    entries_[pos] = std::move(entries_.back());
    index_[entries_[pos].qid] = pos;
  }
  entries_.pop_back();
  autopersist_locked();
  return true;
}

std::optional<FaqEntry> FaqStore::find(const std::string& qid) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(qid);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second];
}

FaqEntry FaqStore::get(const std::string& qid) const {
  auto e = find(qid);
  if (!e) throw Error(ErrorCode::NotFound, "no FAQ with qid '" + qid + "'");
  return *std::move(e);
}

std::vector<FaqMatch> FaqStore::search(const Vector& query, std::size_t k, double min_score) const {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (query.size() != config_.dim) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) + " != store dim " +
                                            std::to_string(config_.dim));
  }
  Vector q = query;
  normalize(q);
  if (l2_norm(q) == 0.0) return {};

  std::vector<FaqMatch> heap;  // min-heap on less_match: worst kept candidate at front
  heap.reserve(k + 1);
  std::shared_lock lock(mu_);
  for (const auto& e : entries_) {
    double s = 0.0;
    const double* ev = e.embedding.data();
    for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * ev[i];
    if (s < min_score) continue;
    if (heap.size() == k) {
      const FaqMatch& worst = heap.front();
      if (!(s > worst.score || (s == worst.score && e.qid < worst.qid))) continue;
      std::pop_heap(heap.begin(), heap.end(), less_match);
      heap.pop_back();
    }
    heap.push_back(FaqMatch{e.qid, e.question, s});
    std::push_heap(heap.begin(), heap.end(), less_match);
  }
  lock.unlock();
  std::sort(heap.begin(), heap.end(), less_match);
  return heap;
}

TagResult FaqStore::tag_runtime(const std::string& question, const std::string& answer) {
  if (text::is_blank(question)) throw Error(ErrorCode::EmptyText, "question is empty");
  if (text::is_blank(answer)) throw Error(ErrorCode::EmptyText, "answer is empty");
  Vector emb = embedder_->embed(question);

  std::unique_lock lock(mu_);
  const FaqEntry* best = nullptr;
  double best_score = -2.0;
  for (const auto& e : entries_) {
    const double s = dot(emb, e.embedding);
    if (s > best_score || (s == best_score && best && e.qid < best->qid)) {
      best_score = s;
      best = &e;
    }
  }
  const auto ts = now();
  if (best && best_score > config_.dedup_threshold) {
    FaqEntry& e = entries_[index_.at(best->qid)];
    ++e.frequency;
    e.updated_at_ms = ts;
    autopersist_locked();
    return TagResult{e.qid, true};
  }
  FaqEntry e;
  e.qid = mint_qid(FaqSource::RuntimeTagged);
  e.question = question;
  e.answer = answer;
  e.frequency = 1;
  e.source = FaqSource::RuntimeTagged;
  e.embedding = std::move(emb);
  e.created_at_ms = e.updated_at_ms = ts;
  std::string qid = e.qid;
  insert_locked(std::move(e));
  autopersist_locked();
  return TagResult{qid, false};
}

ImportResult FaqStore::import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StorageIo, "cannot open " + path.string());
  csv::Reader reader(in);
  ImportResult result;

  auto header = reader.next();
  if (!header || text::join(*header, ",") != kCsvHeader) {
    throw Error(ErrorCode::MalformedRow, "line 1: expected header '" + std::string(kCsvHeader) + "'");
  }
  for (;;) {
    std::optional<csv::Row> row;
    try {
      row = reader.next();
    } catch (const Error& e) {
      result.errors.push_back({reader.line_number(), e.what()});
      break;
    }
    if (!row) break;
    const auto line = reader.line_number();
    if (row->size() == 1 && row->front().empty()) continue;  // blank line
    try {
      if (row->size() != 7) throw Error(ErrorCode::MalformedRow, "expected 7 fields, got " + std::to_string(row->size()));
      const auto& r = *row;
      if (text::is_blank(r[1])) throw Error(ErrorCode::MalformedRow, "missing question");
      FaqUpsert f;
      if (!r[0].empty()) f.qid = r[0];
      f.question = r[1];
      if (r[2].empty()) f.clear_answer = true;
      else f.answer = r[2];
      f.frequency = r[3].empty() ? 0 : std::stoull(r[3]);
      if (!r[4].empty()) f.source = parse_faq_source(r[4]);
      if (!r[5].empty()) f.created_at_ms = std::stoll(r[5]);
      if (!r[6].empty()) f.updated_at_ms = std::stoll(r[6]);
      upsert(f);
      ++result.count;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::StorageIo) throw;
      result.errors.push_back({line, e.what()});
    } catch (const std::logic_error& e) {  // stoull / stoll
      result.errors.push_back({line, std::string("malformed-row: bad number: ") + e.what()});
    }
  }
  return result;
}

std::size_t FaqStore::export_csv(const std::filesystem::path& path) const {
  const auto all = entries();
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& e : all) {
    csv::write_row(out, {e.qid, e.question, e.answer.value_or(""), std::to_string(e.frequency),
                         std::string(to_string(e.source)), std::to_string(e.created_at_ms),
                         std::to_string(e.updated_at_ms)});
  }
  detail::write_file_atomic(path, out.str());
  return all.size();
}

void FaqStore::persist(const std::filesystem::path& path) const {
  // entries() copies under a shared lock, so readers proceed during the write.
  detail::write_file_atomic(path, encode_snapshot(entries(), config_.dim));
}

void FaqStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  SnapshotReader r(ss.str());

  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(ErrorCode::CorruptSnapshot, "bad magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != kSnapshotFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "snapshot version " + std::to_string(version) + ", expected " +
                                                std::to_string(kSnapshotFormatVersion));
  }
  const auto dim = r.pod<std::uint32_t>();
  if (dim != config_.dim) {
    throw Error(ErrorCode::DimMismatch, "snapshot dim " + std::to_string(dim) + " != configured " +
                                            std::to_string(config_.dim));
  }
  const auto count = r.pod<std::uint64_t>();
  std::vector<FaqEntry> loaded;
  for (std::uint64_t i = 0; i < count; ++i) {
    FaqEntry e;
    e.qid = r.str();
    e.question = r.str();
    const bool has_answer = r.pod<std::uint8_t>() != 0;
    auto answer = r.str();
    if (has_answer) e.answer = std::move(answer);
    e.frequency = r.pod<std::uint64_t>();
    const auto src = r.pod<std::uint8_t>();
    if (src > 2) throw Error(ErrorCode::CorruptSnapshot, "bad source tag");
    e.source = static_cast<FaqSource>(src);
    e.created_at_ms = r.pod<std::int64_t>();
    e.updated_at_ms = r.pod<std::int64_t>();
    e.embedding.resize(dim);
    for (auto& x : e.embedding) x = r.pod<double>();
    loaded.push_back(std::move(e));
  }
  r.verify_checksum();

  std::unique_lock lock(mu_);
  entries_.clear();
  index_.clear();
  for (auto& e : loaded) {
    if (index_.count(e.qid)) throw Error(ErrorCode::CorruptSnapshot, "duplicate qid " + e.qid);
    insert_locked(std::move(e));
  }
}

std::unique_ptr<FaqStore> FaqStore::clone(std::shared_ptr<const Embedder> embedder) const {
  StoreConfig c = config_;
  c.snapshot_path.reset();
  auto copy = std::make_unique<FaqStore>(std::move(c), embedder ? std::move(embedder) : embedder_);
  std::shared_lock lock(mu_);
  copy->entries_ = entries_;
  copy->index_ = index_;
  copy->id_rng_ = id_rng_;
  return copy;
}

std::vector<FaqEntry> FaqStore::entries() const {
  std::shared_lock lock(mu_);
  return sorted_copy_locked();
}

FaqPage FaqStore::list(std::size_t offset, std::size_t limit, bool answerless_only) const {
  auto all = entries();
  if (answerless_only) {
    std::erase_if(all, [](const FaqEntry& e) { return e.answer.has_value(); });
  }
  FaqPage page;
  page.total = all.size();
  for (std::size_t i = offset; i < all.size() && page.entries.size() < limit; ++i) {
    page.entries.push_back(std::move(all[i]));
  }
  return page;
}

std::size_t FaqStore::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

}  // namespace faqpilot
