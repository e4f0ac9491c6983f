#include "faqpilot/conversation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"

namespace faqpilot {

using nlohmann::json;

std::string_view to_string(Speaker s) noexcept {
  return s == Speaker::Agent ? "agent" : "customer";
}

Speaker parse_speaker(std::string_view label) {
  const auto lower = text::to_lower(text::trim(label));
  if (lower == "agent") return Speaker::Agent;
  if (lower == "customer") return Speaker::Customer;
  throw Error(ErrorCode::SchemaViolation, "unknown speaker label '" + std::string(label) + "'");
}

std::string TurnWindow::text() const {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += '\n';
    out += t.speaker == Speaker::Agent ? "Agent: " : "Customer: ";
    out += text::trim(t.text);
  }
  return out;
}

std::vector<std::string> TurnWindow::customer_utterances() const {
  std::vector<std::string> out;
  for (const auto& t : turns) {
    if (t.speaker == Speaker::Customer) out.emplace_back(text::trim(t.text));
  }
  return out;
}

namespace {

struct Record {
  std::string call_id;
  Turn turn;
};

Record parse_record(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument,
                "line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorCode::MalformedDocument, "line " + std::to_string(line_no) + ": not an object");
  }
  auto where = [&] { return "line " + std::to_string(line_no); };

  Record r;
  if (auto it = j.find("call_id"); it != j.end()) {
    if (!it->is_string()) throw Error(ErrorCode::SchemaViolation, where() + ": call_id must be a string");
    r.call_id = it->get<std::string>();
  }
  auto idx = j.find("index");
  if (idx == j.end() || !idx->is_number_integer() || idx->get<std::int64_t>() < 0) {
    throw Error(ErrorCode::SchemaViolation, where() + ": missing or invalid index");
  }
  r.turn.index = idx->get<std::size_t>();

  auto speaker = j.find("speaker");
  if (speaker == j.end() || !speaker->is_string()) {
    throw Error(ErrorCode::SchemaViolation, where() + ": missing speaker");
  }
  r.turn.speaker = parse_speaker(speaker->get<std::string>());

  auto txt = j.find("text");
  if (txt == j.end() || !txt->is_string() || text::is_blank(txt->get<std::string>())) {
    throw Error(ErrorCode::SchemaViolation, where() + ": missing or empty text");
  }
  r.turn.text = txt->get<std::string>();

  if (auto ts = j.find("ts_ms"); ts != j.end() && !ts->is_null()) {
    if (!ts->is_number_integer()) throw Error(ErrorCode::SchemaViolation, where() + ": ts_ms must be an integer");
    r.turn.timestamp_ms = ts->get<std::int64_t>();
  }
  return r;
}

void finalize(Conversation& conv) {
  std::sort(conv.turns.begin(), conv.turns.end(),
            [](const Turn& a, const Turn& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    if (conv.turns[i].index != i) {
      const bool dup = i > 0 && conv.turns[i].index == conv.turns[i - 1].index;
      throw Error(ErrorCode::SchemaViolation,
                  "call '" + conv.id + "': " + (dup ? "duplicate index " : "index gap at ") +
                      std::to_string(conv.turns[i].index));
    }
  }
}

}  // namespace

std::vector<Conversation> parse_transcripts(std::istream& in) {
  std::vector<Conversation> calls;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    auto rec = parse_record(line, line_no);
    auto [it, inserted] = by_id.try_emplace(rec.call_id, calls.size());
    if (inserted) calls.push_back(Conversation{rec.call_id, {}});
    calls[it->second].turns.push_back(std::move(rec.turn));
  }
  if (calls.empty()) throw Error(ErrorCode::EmptyTranscript, "document contains no turns");
  for (auto& c : calls) finalize(c);
  return calls;
}

std::vector<Conversation> parse_transcripts(std::string_view document) {
  std::istringstream in{std::string(document)};
  return parse_transcripts(in);
}

Conversation parse_transcript(std::string_view document) {
  auto calls = parse_transcripts(document);
  if (calls.size() != 1) {
    throw Error(ErrorCode::SchemaViolation,
                "expected one call, found " + std::to_string(calls.size()));
  }
  return std::move(calls.front());
}

std::vector<Conversation> load_transcripts(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<Conversation> all;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error(ErrorCode::StorageIo, "cannot open " + f.string());
    auto calls = parse_transcripts(in);
    all.insert(all.end(), std::make_move_iterator(calls.begin()), std::make_move_iterator(calls.end()));
  }
  if (all.empty()) throw Error(ErrorCode::EmptyTranscript, "no transcripts under " + path.string());
  return all;
}

void write_transcript(std::ostream& out, const Conversation& conv) {
  for (const auto& t : conv.turns) {
    json j = {{"call_id", conv.id},
              {"index", t.index},
              {"speaker", to_string(t.speaker)},
              {"text", t.text}};
    if (t.timestamp_ms) j["ts_ms"] = *t.timestamp_ms;
    out << j.dump() << '\n';
  }
}

std::string serialize_transcript(const Conversation& conv) {
  std::ostringstream out;
  write_transcript(out, conv);
  return out.str();
}

void save_transcripts(const std::filesystem::path& path, const std::vector<Conversation>& convs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::StorageIo, "cannot write " + path.string());
  for (const auto& c : convs) write_transcript(out, c);
  if (!out) throw Error(ErrorCode::StorageIo, "write failed for " + path.string());
}

Conversation append_turn(const Conversation& conv, Speaker speaker, std::string_view text,
                         std::optional<std::int64_t> timestamp_ms) {
  if (text::is_blank(text)) throw Error(ErrorCode::EmptyText, "turn text is empty");
  Conversation next = conv;
  const std::size_t index = conv.turns.empty() ? 0 : conv.last_index() + 1;
  next.turns.push_back(Turn{index, speaker, std::string(text), timestamp_ms});
  return next;
}

TurnWindow window(const Conversation& conv, std::size_t size) {
  if (size == 0) throw Error(ErrorCode::ZeroSize, "window size must be >= 1");
  TurnWindow w;
  const std::size_t n = conv.turns.size();
  const std::size_t take = std::min(size, n);
  w.turns.assign(conv.turns.end() - static_cast<std::ptrdiff_t>(take), conv.turns.end());
  if (!w.turns.empty()) {
    w.start_index = w.turns.front().index;
    w.end_index = w.turns.back().index;
  }
  return w;
}

}  // namespace faqpilot
