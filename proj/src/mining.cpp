#include "faqpilot/mining.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "faqpilot/csv.hpp"
#include "faqpilot/error.hpp"
#include "faqpilot/kmeans.hpp"
#include "faqpilot/text.hpp"
#include "fs_util.hpp"
#include "parallel.hpp"

namespace faqpilot {

void MiningConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (k < 2) fail("k must be >= 2");
  if (critic_batch < 1) fail("critic_batch must be >= 1");
  if (top_n < 1) fail("top_n must be >= 1");
  if (kmeans_max_iter < 1) fail("kmeans_max_iter must be >= 1");
  if (concurrency < 1) fail("concurrency must be >= 1");
  if (llm_deadline <= Duration::zero() || rag_deadline <= Duration::zero()) fail("deadlines must be positive");
  if (!(extract_failure_limit >= 0.0 && extract_failure_limit <= 1.0)) fail("extract_failure_limit must lie in [0, 1]");
  if (max_transcript_chars < 64) fail("max_transcript_chars must be >= 64");
}

void StageContext::warn(std::string message) const {
  if (warnings) warnings->push_back(std::move(message));
}

namespace {

std::set<std::string> word_set(std::string_view s) {
  std::istringstream in(text::normalize_question(s));
  std::set<std::string> out;
  std::string w;
  while (in >> w) out.insert(w);
  return out;
}

// Customer turn sharing the most words with the extracted question.
std::size_t approximate_turn(const std::vector<const Turn*>& turns, std::string_view question) {
  const auto q = word_set(question);
  std::size_t best = turns.empty() ? 0 : turns.front()->index;
  double best_score = -1.0;
  for (const Turn* t : turns) {
    if (t->speaker != Speaker::Customer) continue;
    const auto w = word_set(t->text);
    std::size_t common = 0;
    for (const auto& x : q) common += w.count(x);
    const std::size_t uni = q.size() + w.size() - common;
    const double score = uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
    if (score > best_score) {
      best_score = score;
      best = t->index;
    }
  }
  return best;
}

std::vector<RawQuestion> extract_call(const Conversation& conv, const StageContext& ctx) {
  std::vector<RawQuestion> out;
  if (conv.empty()) return out;
  // Whole turns per chunk; a single oversized turn forms its own chunk.
  std::vector<std::vector<const Turn*>> chunks(1);
  std::size_t chars = 0;
  for (const auto& t : conv.turns) {
    const std::size_t len = t.text.size() + 12;
    if (!chunks.back().empty() && chars + len > ctx.config.max_transcript_chars) {
      chunks.emplace_back();
      chars = 0;
    }
    chunks.back().push_back(&t);
    chars += len;
  }
  for (const auto& chunk : chunks) {
    std::string rendered;
    for (const Turn* t : chunk) {
      rendered += (t->speaker == Speaker::Agent ? "Agent: " : "Customer: ") + t->text + "\n";
    }
    PromptVars vars{{"transcript", std::string(text::trim(rendered))}};
    auto req = make_request(Role::Extract, ctx.prompts.render(Role::Extract, vars), ctx.config.llm_deadline,
                            vars);
    for (auto& q : ctx.gateway.complete_list(req, 64)) {
      auto t = std::string(text::trim(q));
      if (t.empty()) continue;
      const auto turn = approximate_turn(chunk, t);
      out.push_back({std::move(t), conv.id, turn});
    }
  }
  return out;
}

std::vector<std::string> split_qids(std::string_view item) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : item) {
    if (c == ',' || c == ';' || c == '[' || c == ']' || std::isspace(static_cast<unsigned char>(c))) flush();
    else cur += c;
  }
  flush();
  return out;
}

std::uint64_t total_frequency(const std::vector<Representative>& reps) {
  std::uint64_t s = 0;
  for (const auto& r : reps) s += r.frequency;
  return s;
}

std::vector<std::vector<std::string>> propose_groups(const std::vector<Representative>& reps,
                                                     const StageContext& ctx, Role role) {
  std::string listing;
  for (const auto& r : reps) {
    listing += "[" + r.qid + "] " + r.text + " (frequency " + std::to_string(r.frequency) + ")\n";
  }
  PromptVars vars{{"representatives", std::string(text::trim(listing))}};
  auto req = make_request(role, ctx.prompts.render(role, vars), ctx.config.llm_deadline, vars);
  std::vector<std::vector<std::string>> groups;
  for (const auto& item : ctx.gateway.complete_list(req, reps.size())) groups.push_back(split_qids(item));
  return groups;
}

std::string format_qid(std::size_t ordinal) {
  std::string digits = std::to_string(ordinal);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "Q" + digits;
}

void upsert_mined(FaqStore& store, const Representative& rep, const std::optional<std::string>& answer) {
  FaqUpsert u;
  u.qid = rep.qid;
  u.question = rep.text;
  if (answer) u.answer = *answer;
  u.frequency = rep.frequency;
  u.source = FaqSource::Mined;
  store.upsert(u);
}

std::vector<csv::Row> read_rows(std::string_view data, std::size_t min_fields) {
  std::istringstream in{std::string(data)};
  csv::Reader reader(in);
  std::vector<csv::Row> rows;
  bool header = true;
  while (auto row = reader.next()) {
    if (header) {
      header = false;
      continue;
    }
    if (row->size() < min_fields) {
      throw Error(ErrorCode::MalformedRow, "stage file line " + std::to_string(reader.line_number()) + ": expected " +
                                               std::to_string(min_fields) + " fields");
    }
    rows.push_back(std::move(*row));
  }
  return rows;
}

std::uint64_t stage_key(std::string_view stage, std::initializer_list<std::string_view> parts) {
  std::uint64_t h = text::fnv1a64(stage);
  for (auto p : parts) {
    h = text::fnv1a64("\x1f", h);
    h = text::fnv1a64(p, h);
  }
  return h;
}

}  // namespace

std::vector<RawQuestion> extract_questions(const std::vector<Conversation>& transcripts, const StageContext& ctx) {
  if (transcripts.empty()) throw Error(ErrorCode::InvalidArgument, "extraction needs at least one transcript");
  const std::size_t n = transcripts.size();
  std::vector<std::vector<RawQuestion>> per_call(n);
  std::vector<std::string> errors(n);
  std::vector<char> failed(n, 0);
  detail::parallel_for(n, ctx.config.concurrency, [&](std::size_t i) {
    try {
      per_call[i] = extract_call(transcripts[i], ctx);
    } catch (const std::exception& e) {
      failed[i] = 1;
      errors[i] = e.what();
    }
  });
  std::size_t failures = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failed[i]) continue;
    ++failures;
    ctx.warn("extract: call '" + transcripts[i].id + "' skipped: " + errors[i]);
  }
  if (static_cast<double>(failures) > ctx.config.extract_failure_limit * static_cast<double>(n)) {
    throw Error(ErrorCode::StageAborted, "extract: " + std::to_string(failures) + " of " + std::to_string(n) +
                                             " calls failed");
  }
  std::vector<RawQuestion> out;
  for (auto& v : per_call) {
    for (auto& q : v) out.push_back(std::move(q));
  }
  return out;
}

std::vector<FilteredQuestion> critic_filter(const std::vector<RawQuestion>& raw, const StageContext& ctx,
                                            std::size_t* batches) {
  const std::size_t b = ctx.config.critic_batch;
  if (b < 1) throw Error(ErrorCode::InvalidArgument, "critic batch must be >= 1");
  const std::size_t count = (raw.size() + b - 1) / b;
  if (batches) *batches = count;
  std::vector<FilteredQuestion> out;
  for (std::size_t start = 0; start < raw.size(); start += b) {
    const std::size_t end = std::min(raw.size(), start + b);
    std::string listing;
    for (std::size_t i = start; i < end; ++i) listing += std::to_string(i - start + 1) + ". " + raw[i].text + "\n";
    PromptVars vars{{"batch", std::string(text::trim(listing))}};
    auto req = make_request(Role::Critic, ctx.prompts.render(Role::Critic, vars), ctx.config.llm_deadline,
                            vars);
    std::vector<char> keep(end - start, 0);
    try {
      for (const auto& item : ctx.gateway.complete_list(req, end - start)) {
        std::size_t i = 0;
        while (i < item.size() && !std::isdigit(static_cast<unsigned char>(item[i]))) ++i;
        std::size_t ordinal = 0;
        bool any = false;
        while (i < item.size() && std::isdigit(static_cast<unsigned char>(item[i]))) {
          ordinal = ordinal * 10 + static_cast<std::size_t>(item[i++] - '0');
          any = true;
        }
        if (any && ordinal >= 1 && ordinal <= keep.size()) keep[ordinal - 1] = 1;
      }
    } catch (const std::exception& e) {
      ctx.warn("critic: batch " + std::to_string(start / b + 1) + " kept unfiltered: " + e.what());
      std::fill(keep.begin(), keep.end(), 1);
    }
    for (std::size_t i = start; i < end; ++i) {
      if (keep[i - start]) out.push_back({raw[i].text, raw[i].call_id});
    }
  }
  return out;
}

std::vector<ClusterAssignment> cluster_questions(const std::vector<FilteredQuestion>& filtered,
                                                 const Embedder& embedder, const MiningConfig& config,
                                                 std::vector<std::string>* warnings) {
  if (filtered.empty()) return {};
  std::size_t k = config.k;
  if (filtered.size() < k) {
    if (warnings) {
      warnings->push_back("cluster: k lowered from " + std::to_string(k) + " to " + std::to_string(filtered.size()) +
                          " (fewer questions than clusters)");
    }
    k = filtered.size();
  }
  std::vector<std::string> texts;
  texts.reserve(filtered.size());
  for (const auto& q : filtered) texts.push_back(q.text);
  const auto vectors = embedder.embed_batch(texts);
  const auto km = kmeans(vectors, {k, config.kmeans_max_iter, config.kmeans_seed, config.kmeans_n_init});
  if (km.reseeds > 0 && warnings) {
    warnings->push_back("cluster: " + std::to_string(km.reseeds) + " empty cluster(s) reseeded");
  }
  std::vector<ClusterAssignment> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    out[c].cluster_id = c;
    out[c].centroid = km.centroids[c];
  }
  for (std::size_t i = 0; i < filtered.size(); ++i) out[km.assignments[i]].members.push_back(filtered[i]);
  return out;
}

std::string most_frequent_member(const std::vector<FilteredQuestion>& members) {
  if (members.empty()) throw Error(ErrorCode::InvalidArgument, "empty cluster has no member to pick");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& m : members) ++counts[m.text];
  const std::string* best = nullptr;
  std::size_t best_n = 0;
  for (const auto& m : members) {
    const auto n = counts[m.text];
    if (n > best_n) {
      best_n = n;
      best = &m.text;
    }
  }
  return *best;
}

Representative summarize_cluster(const ClusterAssignment& cluster, const std::string& qid, const StageContext& ctx) {
  if (cluster.members.empty()) throw Error(ErrorCode::InvalidArgument, "cannot summarize an empty cluster");
  // Distinct members, most frequent first, then by first appearance.
  std::vector<std::pair<std::string, std::size_t>> distinct;
  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& m : cluster.members) {
    auto [it, inserted] = pos.try_emplace(m.text, distinct.size());
    if (inserted) distinct.emplace_back(m.text, 0);
    ++distinct[it->second].second;
  }
  std::stable_sort(distinct.begin(), distinct.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string listing;
  for (const auto& [t, n] : distinct) listing += "- " + t + (n > 1 ? " (x" + std::to_string(n) + ")" : "") + "\n";

  Representative rep;
  rep.qid = qid;
  rep.frequency = cluster.members.size();
  rep.member_qids = {qid};
  try {
    PromptVars vars{{"cluster", std::string(text::trim(listing))},
                    {"count", std::to_string(cluster.members.size())}};
    auto req = make_request(Role::Summarize, ctx.prompts.render(Role::Summarize, vars), ctx.config.llm_deadline,
                            vars);
    auto items = ctx.gateway.complete_list(req, 1);
    if (!items.empty() && !text::is_blank(items.front())) rep.text = std::string(text::trim(items.front()));
  } catch (const std::exception& e) {
    ctx.warn("summarize: cluster " + std::to_string(cluster.cluster_id) + " fell back to its most frequent member: " +
             e.what());
  }
  if (rep.text.empty()) rep.text = most_frequent_member(cluster.members);
  return rep;
}

std::vector<Representative> apply_merge_groups(const std::vector<Representative>& reps,
                                               const std::vector<std::vector<std::string>>& groups,
                                               std::vector<std::string>* warnings) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < reps.size(); ++i) index.emplace(reps[i].qid, i);
  std::vector<std::ptrdiff_t> group_of(reps.size(), -1);
  std::vector<std::vector<std::size_t>> accepted;
  for (const auto& g : groups) {
    std::vector<std::size_t> members;
    std::string problem;
    for (const auto& qid : g) {
      auto it = index.find(qid);
      if (it == index.end()) {
        problem = "unknown qid '" + qid + "'";
        break;
      }
      if (group_of[it->second] >= 0) {
        problem = "qid '" + qid + "' already merged";
        break;
      }
      if (std::find(members.begin(), members.end(), it->second) == members.end()) members.push_back(it->second);
    }
    if (problem.empty() && members.size() < 2) problem = "fewer than two qids";
    if (!problem.empty()) {
      if (warnings) warnings->push_back("merge: group [" + text::join(g, ", ") + "] ignored: " + problem);
      continue;
    }
    for (auto m : members) group_of[m] = static_cast<std::ptrdiff_t>(accepted.size());
    accepted.push_back(std::move(members));
  }

  std::vector<Representative> out;
  std::vector<char> emitted(accepted.size(), 0);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (group_of[i] < 0) {
      out.push_back(reps[i]);
      continue;
    }
    const auto g = static_cast<std::size_t>(group_of[i]);
    if (emitted[g]) continue;
    emitted[g] = 1;
    auto members = accepted[g];
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return reps[a].frequency != reps[b].frequency ? reps[a].frequency > reps[b].frequency
                                                    : reps[a].qid < reps[b].qid;
    });
    Representative merged;
    merged.qid = reps[members.front()].qid;
    merged.text = reps[members.front()].text;
    for (auto m : members) {
      merged.frequency += reps[m].frequency;
      merged.member_qids.insert(merged.member_qids.end(), reps[m].member_qids.begin(), reps[m].member_qids.end());
    }
    std::sort(merged.member_qids.begin(), merged.member_qids.end());
    out.push_back(std::move(merged));
  }
  return out;
}

std::vector<Representative> merge_representatives(const std::vector<Representative>& reps, const StageContext& ctx,
                                                  Role role) {
  if (reps.size() < 2) return reps;
  try {
    return apply_merge_groups(reps, propose_groups(reps, ctx, role), ctx.warnings);
  } catch (const std::exception& e) {
    ctx.warn(std::string(to_string(role)) + ": no merges applied: " + e.what());
    return reps;
  }
}

bool review_acceptable(const std::vector<Representative>& before, const std::vector<Representative>& after) {
  return total_frequency(before) == total_frequency(after) && after.size() * 2 >= before.size();
}

ReviewOutcome final_review(const std::vector<Representative>& merged, const StageContext& ctx, bool enabled) {
  ReviewOutcome out;
  out.reps = merged;
  if (!enabled) {
    out.skipped = true;
    return out;
  }
  if (merged.size() < 2) return out;
  try {
    auto reviewed = apply_merge_groups(merged, propose_groups(merged, ctx, Role::Review), ctx.warnings);
    if (!review_acceptable(merged, reviewed)) {
      ctx.warn("review: output discarded (" + std::to_string(reviewed.size()) + " of " +
               std::to_string(merged.size()) + " items, frequency " + std::to_string(total_frequency(reviewed)) +
               " vs " + std::to_string(total_frequency(merged)) + "); using merge output");
      out.discarded = true;
      return out;
    }
    out.reps = std::move(reviewed);
  } catch (const std::exception& e) {
    ctx.warn(std::string("review: output discarded: ") + e.what());
    out.discarded = true;
  }
  return out;
}

std::vector<Representative> select_top(std::vector<Representative> reps, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "top_n must be >= 1");
  std::sort(reps.begin(), reps.end(), [](const Representative& a, const Representative& b) {
    return a.frequency != b.frequency ? a.frequency > b.frequency : a.qid < b.qid;
  });
  if (reps.size() > n) reps.resize(n);
  return reps;
}

BackfillResult backfill_answers(const std::vector<Representative>& reps, RagClient& rag, FaqStore& store,
                                Duration deadline, std::vector<std::string>* warnings) {
  BackfillResult out;
  for (const auto& rep : reps) {
    std::optional<std::string> answer;
    try {
      answer = rag.retrieve({rep.text, std::nullopt, deadline}).text;
    } catch (const std::exception& e) {
      if (warnings) warnings->push_back("backfill: " + rep.qid + " stored without an answer: " + e.what());
    }
    upsert_mined(store, rep, answer);
    ++out.stored;
    if (answer) ++out.answered;
    out.answers.emplace_back(rep.qid, std::move(answer));
  }
  return out;
}

StageCache::StageCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path StageCache::path_for(std::string_view stage, std::uint64_t key) const {
  return dir_ / (std::string(stage) + "-" + text::hex64(key) + ".csv");
}

std::optional<std::string> StageCache::get(std::string_view stage, std::uint64_t key) const {
  const auto p = path_for(stage, key);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) return std::nullopt;
  return detail::read_file(p);
}

std::filesystem::path StageCache::put(std::string_view stage, std::uint64_t key, std::string_view contents) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::StorageIo, "cannot create " + dir_.string() + ": " + ec.message());
  const auto p = path_for(stage, key);
  detail::write_file_atomic(p, contents);
  return p;
}

std::string encode_raw(const std::vector<RawQuestion>& v) {
  std::ostringstream out;
  csv::write_row(out, {"text", "call_id", "turn_index"});
  for (const auto& q : v) csv::write_row(out, {q.text, q.call_id, std::to_string(q.turn_index)});
  return out.str();
}

std::vector<RawQuestion> decode_raw(std::string_view data) {
  std::vector<RawQuestion> out;
  for (auto& r : read_rows(data, 3)) out.push_back({r[0], r[1], static_cast<std::size_t>(std::stoull(r[2]))});
  return out;
}

std::string encode_filtered(const std::vector<FilteredQuestion>& v) {
  std::ostringstream out;
  csv::write_row(out, {"text", "call_id"});
  for (const auto& q : v) csv::write_row(out, {q.text, q.call_id});
  return out.str();
}

std::vector<FilteredQuestion> decode_filtered(std::string_view data) {
  std::vector<FilteredQuestion> out;
  for (auto& r : read_rows(data, 2)) out.push_back({r[0], r[1]});
  return out;
}

std::string encode_clusters(const std::vector<ClusterAssignment>& v) {
  std::ostringstream out;
  csv::write_row(out, {"cluster_id", "text", "call_id"});
  for (const auto& c : v) {
    // An empty cluster is kept as a row with blank fields so k survives a reload.
    if (c.members.empty()) csv::write_row(out, {std::to_string(c.cluster_id), "", ""});
    for (const auto& m : c.members) csv::write_row(out, {std::to_string(c.cluster_id), m.text, m.call_id});
  }
  return out.str();
}

std::vector<ClusterAssignment> decode_clusters(std::string_view data) {
  std::vector<ClusterAssignment> out;
  for (auto& r : read_rows(data, 3)) {
    const auto id = static_cast<std::size_t>(std::stoull(r[0]));
    if (out.size() <= id) {
      const auto old = out.size();
      out.resize(id + 1);
      for (std::size_t i = old; i <= id; ++i) out[i].cluster_id = i;
    }
    if (!r[1].empty()) out[id].members.push_back({r[1], r[2]});
  }
  return out;
}

std::string encode_reps(const std::vector<Representative>& v, bool with_members) {
  std::ostringstream out;
  if (with_members) csv::write_row(out, {"qid", "text", "frequency", "member_qids"});
  else csv::write_row(out, {"qid", "text", "frequency"});
  for (const auto& r : v) {
    csv::Row row{r.qid, r.text, std::to_string(r.frequency)};
    if (with_members) row.push_back(text::join(r.member_qids, ";"));
    csv::write_row(out, row);
  }
  return out.str();
}

std::vector<Representative> decode_reps(std::string_view data) {
  std::vector<Representative> out;
  for (auto& r : read_rows(data, 3)) {
    Representative rep{r[0], r[1], std::stoull(r[2]), {}};
    if (r.size() >= 4 && !r[3].empty()) {
      std::string cur;
      for (char c : r[3]) {
        if (c == ';') {
          rep.member_qids.push_back(std::move(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      rep.member_qids.push_back(std::move(cur));
    } else {
      rep.member_qids = {rep.qid};
    }
    out.push_back(std::move(rep));
  }
  return out;
}

const StageReport* MiningReport::stage(std::string_view name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

nlohmann::json MiningReport::to_json() const {
  nlohmann::json j;
  j["transcripts"] = transcripts;
  j["effective_k"] = effective_k;
  j["critic_batches"] = critic_batches;
  j["stored"] = stored;
  j["answered"] = answered;
  auto& st = j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    st.push_back({{"name", s.name},
                  {"input_count", s.input_count},
                  {"output_count", s.output_count},
                  {"frequency_total", s.frequency_total},
                  {"cache_hit", s.cache_hit},
                  {"skipped", s.skipped},
                  {"discarded", s.discarded},
                  {"elapsed_ms", s.elapsed_ms},
                  {"llm_calls", s.llm_calls},
                  {"rag_calls", s.rag_calls},
                  {"warnings", s.warnings},
                  {"output_file", s.output_file}});
  }
  auto& top_json = j["top"] = nlohmann::json::array();
  for (const auto& r : top) {
    top_json.push_back({{"qid", r.qid}, {"text", r.text}, {"frequency", r.frequency}, {"member_qids", r.member_qids}});
  }
  return j;
}

void write_report(const std::filesystem::path& path, const MiningReport& report) {
  detail::write_file_atomic(path, report.to_json().dump(2) + "\n");
}

namespace {

// Times one stage and records gateway/RAG call deltas into its report.
class StageScope {
 public:
  StageScope(MiningReport& report, std::string name, const LlmGateway& gateway, const RagClient& rag)
      : report_(report), gateway_(gateway), rag_(rag), start_(std::chrono::steady_clock::now()),
        llm0_(gateway.calls()), rag0_(rag.counters().calls_made) {
    rep.name = std::move(name);
  }
  StageScope(const StageScope&) = delete;
  StageScope& operator=(const StageScope&) = delete;
  ~StageScope() {
    rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    rep.llm_calls = gateway_.calls() - llm0_;
    rep.rag_calls = rag_.counters().calls_made - rag0_;
    report_.stages.push_back(std::move(rep));
  }

  /// Cached output for `key`, marking the stage as a hit.
  std::optional<std::string> lookup(const std::optional<StageCache>& cache, std::uint64_t key) {
    if (!cache) return std::nullopt;
    auto hit = cache->get(rep.name, key);
    if (hit) {
      rep.cache_hit = true;
      rep.output_file = cache->path_for(rep.name, key).string();
    }
    return hit;
  }

  void save(const std::optional<StageCache>& cache, std::uint64_t key, std::string_view contents) {
    if (cache) rep.output_file = cache->put(rep.name, key, contents).string();
  }

  StageReport rep;

 private:
  MiningReport& report_;
  const LlmGateway& gateway_;
  const RagClient& rag_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t llm0_;
  std::uint64_t rag0_;
};

}  // namespace

MiningReport run_pipeline(const std::vector<Conversation>& transcripts, const MiningConfig& config,
                          LlmGateway& gateway, const PromptLibrary& prompts, const Embedder& embedder,
                          RagClient& rag, FaqStore& store) {
  config.validate();
  MiningReport report;
  report.transcripts = transcripts.size();
  std::optional<StageCache> cache;
  if (config.cache_dir) cache.emplace(*config.cache_dir);

  std::string corpus;
  for (const auto& c : transcripts) corpus += serialize_transcript(c);

  // extract
  std::string raw_csv;
  std::vector<RawQuestion> raw;
  {
    StageScope s(report, "extract", gateway, rag);
    const auto key = stage_key("extract", {prompts.raw(Role::Extract), std::to_string(config.max_transcript_chars),
                                           corpus});
    if (auto hit = s.lookup(cache, key)) {
      raw_csv = std::move(*hit);
      raw = decode_raw(raw_csv);
    } else {
      raw = extract_questions(transcripts, {gateway, prompts, config, &s.rep.warnings});
      raw_csv = encode_raw(raw);
      s.save(cache, key, raw_csv);
    }
    s.rep.input_count = transcripts.size();
    s.rep.output_count = raw.size();
  }

  // critic
  std::string filtered_csv;
  std::vector<FilteredQuestion> filtered;
  report.critic_batches = (raw.size() + config.critic_batch - 1) / config.critic_batch;
  {
    StageScope s(report, "critic", gateway, rag);
    const auto key = stage_key("critic", {prompts.raw(Role::Critic), std::to_string(config.critic_batch), raw_csv});
    if (auto hit = s.lookup(cache, key)) {
      filtered_csv = std::move(*hit);
      filtered = decode_filtered(filtered_csv);
    } else {
      filtered = critic_filter(raw, {gateway, prompts, config, &s.rep.warnings});
      filtered_csv = encode_filtered(filtered);
      s.save(cache, key, filtered_csv);
    }
    s.rep.input_count = raw.size();
    s.rep.output_count = filtered.size();
  }

  // cluster
  std::string clusters_csv;
  std::vector<ClusterAssignment> clusters;
  {
    StageScope s(report, "cluster", gateway, rag);
    std::ostringstream params;
    params << config.k << ' ' << config.kmeans_max_iter << ' ' << config.kmeans_seed << ' ' << config.kmeans_n_init
           << ' ' << embedder.dim();
    const auto key = stage_key("cluster", {params.str(), filtered_csv});
    if (auto hit = s.lookup(cache, key)) {
      clusters_csv = std::move(*hit);
      clusters = decode_clusters(clusters_csv);
    } else {
      clusters = cluster_questions(filtered, embedder, config, &s.rep.warnings);
      clusters_csv = encode_clusters(clusters);
      s.save(cache, key, clusters_csv);
    }
    report.effective_k = clusters.size();
    s.rep.input_count = filtered.size();
    s.rep.output_count = clusters.size();
  }

  // summarize
  std::string reps_csv;
  std::vector<Representative> reps;
  {
    StageScope s(report, "summarize", gateway, rag);
    const auto key = stage_key("summarize", {prompts.raw(Role::Summarize), clusters_csv});
    if (auto hit = s.lookup(cache, key)) {
      reps_csv = std::move(*hit);
      reps = decode_reps(reps_csv);
    } else {
      std::vector<const ClusterAssignment*> nonempty;
      for (const auto& c : clusters) {
        if (!c.members.empty()) nonempty.push_back(&c);
      }
      reps.resize(nonempty.size());
      std::vector<std::vector<std::string>> warnings(nonempty.size());
      detail::parallel_for(nonempty.size(), config.concurrency, [&](std::size_t i) {
        reps[i] = summarize_cluster(*nonempty[i], format_qid(i + 1), {gateway, prompts, config, &warnings[i]});
      });
      for (auto& w : warnings) s.rep.warnings.insert(s.rep.warnings.end(), w.begin(), w.end());
      reps_csv = encode_reps(reps, false);
      s.save(cache, key, reps_csv);
    }
    s.rep.input_count = clusters.size();
    s.rep.output_count = reps.size();
    s.rep.frequency_total = total_frequency(reps);
  }

  // merge
  std::string merged_csv;
  std::vector<Representative> merged;
  {
    StageScope s(report, "merge", gateway, rag);
    const auto key = stage_key("merge", {prompts.raw(Role::Merge), reps_csv});
    if (auto hit = s.lookup(cache, key)) {
      merged_csv = std::move(*hit);
      merged = decode_reps(merged_csv);
    } else {
      merged = merge_representatives(reps, {gateway, prompts, config, &s.rep.warnings}, Role::Merge);
      merged_csv = encode_reps(merged, true);
      s.save(cache, key, merged_csv);
    }
    s.rep.input_count = reps.size();
    s.rep.output_count = merged.size();
    s.rep.frequency_total = total_frequency(merged);
  }

  // review
  std::string reviewed_csv;
  std::vector<Representative> reviewed;
  {
    StageScope s(report, "review", gateway, rag);
    if (!config.review_enabled) {
      s.rep.skipped = true;
      reviewed = merged;
      reviewed_csv = merged_csv;
    } else {
      const auto key = stage_key("review", {prompts.raw(Role::Review), merged_csv});
      if (auto hit = s.lookup(cache, key)) {
        reviewed_csv = std::move(*hit);
        reviewed = decode_reps(reviewed_csv);
      } else {
        auto outcome = final_review(merged, {gateway, prompts, config, &s.rep.warnings}, true);
        s.rep.discarded = outcome.discarded;
        reviewed = std::move(outcome.reps);
        reviewed_csv = encode_reps(reviewed, true);
        s.save(cache, key, reviewed_csv);
      }
    }
    s.rep.input_count = merged.size();
    s.rep.output_count = reviewed.size();
    s.rep.frequency_total = total_frequency(reviewed);
  }

  // select
  {
    StageScope s(report, "select", gateway, rag);
    report.top = select_top(reviewed, config.top_n);
    s.rep.input_count = reviewed.size();
    s.rep.output_count = report.top.size();
    s.rep.frequency_total = total_frequency(report.top);
    s.save(cache, stage_key("select", {std::to_string(config.top_n), reviewed_csv}), encode_reps(report.top, true));
  }

  // backfill
  {
    StageScope s(report, "backfill", gateway, rag);
    const auto key = stage_key("backfill", {encode_reps(report.top, true)});
    if (auto hit = s.lookup(cache, key)) {
      std::unordered_map<std::string, std::string> answers;
      for (auto& r : read_rows(*hit, 2)) answers.emplace(r[0], r[1]);
      for (const auto& rep : report.top) {
        auto it = answers.find(rep.qid);
        upsert_mined(store, rep, it == answers.end() ? std::nullopt : std::optional<std::string>(it->second));
        ++report.stored;
        if (it != answers.end()) ++report.answered;
      }
    } else {
      auto result = backfill_answers(report.top, rag, store, config.rag_deadline, &s.rep.warnings);
      report.stored = result.stored;
      report.answered = result.answered;
      // Only a complete set is cached, so a rerun retries earlier RAG failures.
      if (result.answered == result.stored) {
        std::ostringstream out;
        csv::write_row(out, {"qid", "answer"});
        for (const auto& [qid, answer] : result.answers) csv::write_row(out, {qid, *answer});
        s.save(cache, key, out.str());
      }
    }
    s.rep.input_count = report.top.size();
    s.rep.output_count = report.stored;
  }
  return report;
}

}  // namespace faqpilot
