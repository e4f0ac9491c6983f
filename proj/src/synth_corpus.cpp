#include "faqpilot/synth_corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>

#include "faqpilot/csv.hpp"
#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"

namespace faqpilot {

namespace {

constexpr std::array<std::string_view, 6> kPrefixes = {"", "", "Also, ", "So ", "Quick question, ", "Um, "};
constexpr std::array<std::string_view, 5> kPreambles = {
    "", "", "I have a question about my account. ", "I'm having some trouble. ", "My neighbor said to call you. "};
constexpr std::array<std::string_view, 4> kAgentReplies = {
    "Sure, let me look into that for you.", "Good question, one moment please.",
    "Let me pull that up.", "I can help with that."};
constexpr std::array<std::string_view, 3> kGreetings = {
    "Hi, how are you today?", "Good morning, how are you?", "Hello there, how is your day going?"};
constexpr std::array<std::string_view, 5> kVerification = {
    "Do you need my email address?", "Should I give you my ticket number?", "Can you verify my phone number?",
    "What is your name again?", "Where are you located?"};

template <typename Array>
std::string_view pick(const Array& a, std::mt19937_64& rng) {
  return a[std::uniform_int_distribution<std::size_t>(0, a.size() - 1)(rng)];
}

bool chance(double p, std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

std::string jitter(const std::string& question, std::mt19937_64& rng) {
  std::string q = question;
  if (!q.empty() && q.back() == '?') q.pop_back();
  if (chance(0.2, rng)) q += " please";
  if (chance(0.25, rng)) q = text::to_lower(q);
  const auto prefix = pick(kPrefixes, rng);
  if (!prefix.empty() && !q.empty()) {
    q[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(q[0])));
    // Keep the pronoun capitalized after lowering the first letter.
    if (q.rfind("i ", 0) == 0) q[0] = 'I';
    q = std::string(prefix) + q;
  }
  if (!chance(0.15, rng)) q += '?';
  return q;
}

}  // namespace

std::vector<Conversation> synth_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  if (spec.num_calls == 0) throw Error(ErrorCode::Infeasible, "corpus needs at least one call");
  if (spec.max_questions_per_call == 0) throw Error(ErrorCode::Infeasible, "max_questions_per_call must be >= 1");
  if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0) throw Error(ErrorCode::Infeasible, "noise_rate outside [0, 1]");
  std::size_t total = 0;
  for (const auto& intent : spec.intents) {
    if (text::is_blank(intent.question)) throw Error(ErrorCode::Infeasible, "intent with an empty question");
    total += intent.target_frequency;
  }
  if (total > spec.num_calls * spec.max_questions_per_call) {
    throw Error(ErrorCode::Infeasible, std::to_string(total) + " planted questions do not fit in " +
                                           std::to_string(spec.num_calls) + " calls of at most " +
                                           std::to_string(spec.max_questions_per_call));
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> occurrences;
  occurrences.reserve(total);
  for (std::size_t i = 0; i < spec.intents.size(); ++i) occurrences.insert(occurrences.end(), spec.intents[i].target_frequency, i);
  std::shuffle(occurrences.begin(), occurrences.end(), rng);

  // Round-robin keeps every call at or below ceil(total / num_calls).
  std::vector<std::vector<std::size_t>> per_call(spec.num_calls);
  for (std::size_t i = 0; i < occurrences.size(); ++i) per_call[i % spec.num_calls].push_back(occurrences[i]);
  std::shuffle(per_call.begin(), per_call.end(), rng);

  std::vector<Conversation> out;
  out.reserve(spec.num_calls);
  for (std::size_t c = 0; c < spec.num_calls; ++c) {
    Conversation conv;
    conv.id = "call-" + std::string(c < 9 ? "000" : c < 99 ? "00" : c < 999 ? "0" : "") + std::to_string(c + 1);
    auto say = [&conv](Speaker who, std::string text) {
      conv.turns.push_back(Turn{conv.turns.size(), who, std::move(text), std::nullopt});
    };
    const bool noisy = chance(spec.noise_rate, rng);
    say(Speaker::Agent, "Thank you for calling, my name is Alex. How can I help you today?");
    if (noisy) {
      say(Speaker::Customer, std::string(pick(kGreetings, rng)));
      say(Speaker::Agent, "I'm doing well, thanks for asking.");
    }
    const auto& asks = per_call[c];
    const std::size_t verify_at = noisy ? std::uniform_int_distribution<std::size_t>(0, asks.size())(rng) : 0;
    for (std::size_t i = 0; i <= asks.size(); ++i) {
      if (noisy && i == verify_at) {
        say(Speaker::Customer, std::string(pick(kVerification, rng)));
        say(Speaker::Agent, "Yes, please go ahead.");
      }
      if (i == asks.size()) break;
      say(Speaker::Customer, std::string(pick(kPreambles, rng)) + jitter(spec.intents[asks[i]].question, rng));
      say(Speaker::Agent, std::string(pick(kAgentReplies, rng)));
    }
    if (asks.empty()) say(Speaker::Customer, "I just wanted to confirm my appointment for Friday. Thanks.");
    say(Speaker::Agent, "Is there anything else I can help you with?");
    say(Speaker::Customer, "No, that's all. Thanks!");
    out.push_back(std::move(conv));
  }
  return out;
}

std::vector<PlantedIntent> default_intents() {
  return {
      {"How do I reset my router?", 123},
      {"Why is my bill higher this month?", 100},
      {"How can I upgrade my internet plan?", 92},
      {"When will the outage in my area be fixed?", 85},
      {"How do I set up automatic payments?", 78},
      {"What are the fees for cancelling my contract?", 72},
      {"Can I move my service to a new address?", 66},
      {"How do I return my rented modem?", 60},
      {"What channels are included in the basic TV package?", 55},
      {"Why is my internet connection so slow?", 50},
      {"How do I change my billing date?", 40},
      {"Is there a discount for seniors?", 36},
      {"How long does a technician visit take?", 32},
      {"Can I pause my service while traveling?", 28},
      {"What is the data cap on my plan?", 25},
      {"How do I activate my new SIM card?", 22},
      {"Where can I find my latest invoice?", 19},
      {"Do you offer international calling plans?", 16},
      {"How do I report a billing error?", 13},
      {"Can I add another line to my mobile plan?", 10},
  };
}

std::vector<PlantedIntent> load_intents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StorageIo, "cannot read " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 2 || (*header)[0] != "question" || (*header)[1] != "frequency") {
    throw Error(ErrorCode::MalformedRow, path.string() + ": expected header 'question,frequency'");
  }
  std::vector<PlantedIntent> out;
  while (auto row = reader.next()) {
    if (row->size() == 1 && text::is_blank((*row)[0])) continue;
    if (row->size() != 2) {
      throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(reader.line_number()) +
                                               ": expected 2 fields");
    }
    try {
      out.push_back({(*row)[0], static_cast<std::size_t>(std::stoull((*row)[1]))});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(reader.line_number()) +
                                               ": bad frequency '" + (*row)[1] + "'");
    }
  }
  return out;
}

}  // namespace faqpilot
