#include "faqpilot/scripted_responders.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>

#include "faqpilot/embedding.hpp"
#include "faqpilot/text.hpp"

namespace faqpilot::scripted {

namespace {

constexpr std::array<std::string_view, 14> kFillers = {
    "also",  "and",        "so",        "um",         "uh",    "oh", "hi", "hello", "okay", "ok", "well",
    "quick question", "one more thing", "i was wondering"};

constexpr std::array<std::string_view, 22> kQuestionWords = {
    "how",  "what",   "why",   "when", "where", "which", "who",  "whom", "whose", "can",  "could",
    "do",   "does",   "did",   "is",   "are",   "will",  "would", "should", "may", "am", "have"};

constexpr std::array<std::string_view, 22> kDiscard = {
    "how are you",   "how's your day", "how is your day", "good morning", "good afternoon", "nice to meet you",
    "your name",     "who am i speaking", "who is this",  "where are you", "are you a robot", "are you located",
    "email",         "phone number",   "ticket number",   "verify",         "verification",   "authenticate",
    "date of birth", "security question", "account number", "social security"};

bool starts_with_word(std::string_view s, std::string_view w) {
  return s.size() >= w.size() && s.substr(0, w.size()) == w && (s.size() == w.size() || s[w.size()] == ' ');
}

std::string first_word(std::string_view s) {
  auto sp = s.find(' ');
  return std::string(s.substr(0, sp));
}

const Embedder& similarity_embedder() {
  static const DeterministicEmbedder e(256, 0);
  return e;
}

// "- text" / "N. text" / "[id] text" listings; strips the marker.
std::vector<std::string> listing_lines(std::string_view block) {
  std::vector<std::string> out;
  for (auto& line : text::split_lines(block)) {
    auto t = std::string(text::trim(line));
    if (t.empty() || t == "(none)") continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::string strip_marker(std::string_view line) {
  auto t = text::trim(line);
  if (!t.empty() && (t[0] == '-' || t[0] == '*')) return std::string(text::trim(t.substr(1)));
  std::size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) return std::string(text::trim(t.substr(i + 1)));
  return std::string(t);
}

struct Tagged {
  std::string id;
  std::string text;
};

// "[Q0001] text (frequency 12)" -> {Q0001, text}
std::optional<Tagged> parse_tagged(std::string_view line) {
  auto t = text::trim(line);
  if (t.empty() || t[0] != '[') return std::nullopt;
  auto close = t.find(']');
  if (close == std::string_view::npos) return std::nullopt;
  Tagged out{std::string(t.substr(1, close - 1)), std::string(text::trim(t.substr(close + 1)))};
  auto paren = out.text.rfind(" (frequency ");
  if (paren != std::string::npos) out.text.resize(paren);
  return out;
}

std::vector<std::string> speaker_lines(std::string_view rendered, std::string_view speaker) {
  std::vector<std::string> out;
  const std::string prefix = std::string(speaker) + ":";
  for (auto& line : text::split_lines(rendered)) {
    auto t = text::trim(line);
    if (t.substr(0, prefix.size()) == prefix) out.emplace_back(text::trim(t.substr(prefix.size())));
  }
  return out;
}

std::string numbered(const std::vector<std::string>& items) {
  if (items.empty()) return "none";
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) out << (i + 1) << ". " << items[i] << '\n';
  return out.str();
}

std::string var(const CompletionRequest& req, std::string_view name) {
  auto it = req.vars.find(name);
  return it == req.vars.end() ? std::string() : it->second;
}

std::vector<std::string> answered_texts(const CompletionRequest& req) {
  std::vector<std::string> out;
  for (auto& l : listing_lines(var(req, "answered"))) out.push_back(strip_marker(l));
  return out;
}

bool near_answered(const Vector& v, const std::vector<Vector>& answered) {
  return std::any_of(answered.begin(), answered.end(), [&](const Vector& a) { return dot(v, a) > 0.9; });
}

std::string respond_extract(const CompletionRequest& req) {
  std::vector<std::string> qs;
  for (auto& u : speaker_lines(var(req, "transcript"), "Customer")) {
    for (auto& q : question_sentences(u)) qs.push_back(std::move(q));
  }
  return numbered(qs);
}

std::string respond_critic(const CompletionRequest& req) {
  std::vector<std::string> keep;
  for (auto& line : listing_lines(var(req, "batch"))) {
    auto dot_pos = line.find('.');
    if (dot_pos == std::string::npos) continue;
    if (!is_discardable(line.substr(dot_pos + 1))) keep.push_back(line.substr(0, dot_pos));
  }
  return numbered(keep);
}

std::string respond_summarize(const CompletionRequest& req) {
  // Members arrive as "- text (xN)"; vote by canonical key.
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // key -> (count, first position)
  std::size_t pos = 0;
  for (auto& line : listing_lines(var(req, "cluster"))) {
    auto t = strip_marker(line);
    std::size_t n = 1;
    auto x = t.rfind(" (x");
    if (x != std::string::npos && t.back() == ')') {
      n = std::stoul(t.substr(x + 3, t.size() - x - 4));
      t.resize(x);
    }
    auto key = canonical_key(t);
    if (key.empty()) continue;
    auto [it, inserted] = votes.try_emplace(key, 0, pos++);
    it->second.first += n;
  }
  if (votes.empty()) return "none";
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second.first > best->second.first ||
        (it->second.first == best->second.first && it->second.second < best->second.second)) {
      best = it;
    }
  }
  return "1. " + tidy_question(best->first) + "\n";
}

std::string respond_merge(const CompletionRequest& req) {
  std::map<std::string, std::vector<std::string>> groups;
  std::vector<std::string> order;
  for (auto& line : listing_lines(var(req, "representatives"))) {
    auto tagged = parse_tagged(strip_marker(line));
    if (!tagged) continue;
    auto key = canonical_key(tagged->text);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(tagged->id);
  }
  std::vector<std::string> out;
  for (const auto& key : order) {
    const auto& ids = groups[key];
    if (ids.size() >= 2) out.push_back(text::join(ids, ", "));
  }
  return numbered(out);
}

std::string respond_match(const CompletionRequest& req) {
  const auto& emb = similarity_embedder();
  std::vector<Vector> customer;
  for (auto& u : speaker_lines(var(req, "window"), "Customer")) {
    auto qs = question_sentences(u);
    if (qs.empty()) qs.push_back(u);
    for (auto& q : qs) {
      if (!text::is_blank(q)) customer.push_back(emb.embed(q));
    }
  }
  std::vector<Vector> answered;
  for (auto& a : answered_texts(req)) {
    if (!text::is_blank(a)) answered.push_back(emb.embed(a));
  }
  std::vector<std::pair<double, std::string>> scored;
  for (auto& line : listing_lines(var(req, "candidates"))) {
    auto tagged = parse_tagged(line);
    if (!tagged || text::is_blank(tagged->text)) continue;
    auto v = emb.embed(tagged->text);
    if (near_answered(v, answered)) continue;
    double best = -1.0;
    for (const auto& c : customer) best = std::max(best, dot(v, c));
    if (best >= 0.6) scored.emplace_back(best, tagged->id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < 3; ++i) out.push_back(scored[i].second);
  return numbered(out);
}

std::string respond_generate(const CompletionRequest& req) {
  const auto& emb = similarity_embedder();
  std::vector<Vector> answered;
  for (auto& a : answered_texts(req)) {
    if (!text::is_blank(a)) answered.push_back(emb.embed(a));
  }
  std::vector<std::string> qs;
  for (auto& u : speaker_lines(var(req, "window"), "Customer")) {
    for (auto& q : question_sentences(u)) {
      if (is_discardable(q)) continue;
      auto tidy = tidy_question(q);
      if (tidy.size() < 2 || near_answered(emb.embed(tidy), answered)) continue;
      qs.push_back(std::move(tidy));
    }
  }
  std::reverse(qs.begin(), qs.end());  // most recent first
  std::vector<std::string> out;
  for (auto& q : qs) {
    if (out.size() == 3) break;
    if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(std::move(q));
  }
  return numbered(out);
}

}  // namespace

std::string canonical_key(std::string_view question) {
  std::string s = text::normalize_question(question);
  bool stripped = true;
  while (stripped && !s.empty()) {
    stripped = false;
    for (auto f : kFillers) {
      if (starts_with_word(s, f)) {
        s.erase(0, std::min(s.size(), f.size() + 1));
        stripped = true;
      }
    }
  }
  constexpr std::string_view please = " please";
  if (s.size() > please.size() && s.compare(s.size() - please.size(), please.size(), please) == 0) {
    s.resize(s.size() - please.size());
  }
  return s;
}

std::string tidy_question(std::string_view question) {
  auto key = canonical_key(question);
  std::istringstream words(key);
  std::string w;
  std::string out;
  while (words >> w) {
    if (w == "i" || w.rfind("i'", 0) == 0) w[0] = 'I';
    if (!out.empty()) out += ' ';
    out += w;
  }
  if (out.empty()) return out;
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + "?";
}

bool is_discardable(std::string_view question) {
  const auto lower = text::to_lower(question);
  return std::any_of(kDiscard.begin(), kDiscard.end(),
                     [&](std::string_view k) { return lower.find(k) != std::string::npos; });
}

std::vector<std::string> question_sentences(std::string_view utterance) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&](bool asked) {
    auto t = std::string(text::trim(current));
    current.clear();
    if (t.empty()) return;
    const auto key = canonical_key(t);
    if (key.empty()) return;
    const auto w = first_word(key);
    const bool leads = std::find(kQuestionWords.begin(), kQuestionWords.end(), w) != kQuestionWords.end();
    if (asked || leads) out.push_back(std::move(t));
  };
  for (char c : utterance) {
    current += c;
    if (c == '?') flush(true);
    else if (c == '.' || c == '!') flush(false);
  }
  flush(false);
  return out;
}

ScriptedBehavior offline_behavior() {
  ScriptedBehavior b;
  b.rules.push_back(ScriptedRule::for_role(Role::Extract, respond_extract));
  b.rules.push_back(ScriptedRule::for_role(Role::Critic, respond_critic));
  b.rules.push_back(ScriptedRule::for_role(Role::Summarize, respond_summarize));
  b.rules.push_back(ScriptedRule::for_role(Role::Merge, respond_merge));
  b.rules.push_back(ScriptedRule::for_role(Role::Review, respond_merge));
  b.rules.push_back(ScriptedRule::for_role(Role::Match, respond_match));
  b.rules.push_back(ScriptedRule::for_role(Role::Generate, respond_generate));
  return b;
}

}  // namespace faqpilot::scripted
