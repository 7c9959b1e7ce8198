#include "drr/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "drr/errors.hpp"
#include "text_util.hpp"

namespace drr {

namespace prompts {

const std::string_view kStandardQaDirect =
    "You are a knowledgeable question-answering assistant, specializing in multiple-choice "
    "questions. Based on the question and the list of choices provided, select the best answer. "
    "Carefully evaluate each option before deciding. Provide your choice (e.g., 0, 1, 2, etc) "
    "along with a brief explanation of your reasoning.\n"
    "\n"
    "Respond only with the following format, nothing else:\n"
    "Answer: [Provide the answer here]\n"
    "Rationale: [Provide the rationale here]\n"
    "\n"
    "Do not include any additional text, headers, or explanations outside this format.";

const std::string_view kStandardQaGradual =
    "You are a highly knowledgeable assistant skilled in multi-step reasoning for multiple-choice "
    "question answering. Based on the question and the list of choices provided, select the best "
    "answer. Carefully evaluate each option before deciding. Provide your choice (e.g., 0, 1, 2, "
    "etc) along with a brief explanation of your reasoning.\n"
    "Respond only with the following format, nothing else:\n"
    "Answer: [Provide the answer here]\n"
    "Rationale: [Provide the rationale here]\n"
    "\n"
    "Do not include any additional text, headers, or explanations outside this format.";

const std::string_view kAbstainQa =
    "You are a highly knowledgeable assistant skilled in multi-step reasoning for multiple-choice "
    "question answering. Based on the question and the list of choices provided, select the best "
    "answer. Carefully evaluate each option before deciding. Provide your choice (e.g., 0, 1, 2, "
    "etc) along with a brief explanation of your reasoning.\n"
    "Respond only with the following format, nothing else:\n"
    "Answer: [Provide answer here or 'none of the above']\n"
    "Rationale: [Provide the rationale here]\n"
    "\n"
    "Do not include any additional text, headers, or explanations outside this format.";

const std::string_view kExploration =
    "You are an expert assistant specializing in multiple-choice questions, dedicated to "
    "exploring multiple ways of thinking to provide accurate answers. Below, you will see an "
    "LLM's previous answer, including the choice it selected and its reasoning, followed by the "
    "feedback: 'Wrong answer! Try again.'\n"
    "\n"
    "Your task is to **think outside the box** and use a **completely different line of "
    "reasoning** to approach the question. Carefully reassess each option, explore alternative "
    "interpretations, and **avoid repeating the same ideas**. Focus on providing fresh insights "
    "and explain your reasoning in a distinct way.\n"
    "\n"
    "Respond only with the following format, nothing else:\n"
    "Answer: [Provide answer here or 'none of the above']\n"
    "Rationale: [Provide the rationale here]\n"
    "\n"
    "Do not include any additional text, headers, or explanations outside this format.";

const std::string_view kDirectFeedback = "Wrong Answer! Try again.";

const std::string_view kGradualFeedback =
    "Env: The previous response was insufficient; explore a new line of reasoning to approach a "
    "more accurate answer.";

}  // namespace prompts

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
  if (max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be positive");
}

std::string_view to_string(StrategyKind kind) {
  return kind == StrategyKind::Direct ? "direct" : "gradual";
}

StrategyKind parse_strategy_kind(std::string_view text) {
  const std::string lower = detail::to_lower(text);
  if (lower == "direct") return StrategyKind::Direct;
  if (lower == "gradual") return StrategyKind::Gradual;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "' (direct|gradual)");
}

PromptStrategy PromptStrategy::direct() {
  PromptStrategy s;
  s.kind = StrategyKind::Direct;
  s.turn1_params.temperature = 0.1;
  s.turn1_params.top_p = 0.9;
  s.later_params.temperature = 0.6;
  s.later_params.top_p = 0.7;
  return s;
}

PromptStrategy PromptStrategy::gradual() {
  PromptStrategy s;
  s.kind = StrategyKind::Gradual;
  s.turn1_params.temperature = 0.6;
  s.turn1_params.top_p = 0.9;
  s.later_params = s.turn1_params;
  return s;
}

PromptStrategy PromptStrategy::for_kind(StrategyKind kind) {
  return kind == StrategyKind::Direct ? direct() : gradual();
}

bool PromptStrategy::abstain_allowed(int turn) const {
  if (allow_abstain_token) return true;
  return kind == StrategyKind::Direct && turn > 1;
}

std::string_view PromptStrategy::system_prompt(int turn) const {
  if (kind == StrategyKind::Direct && turn > 1) return prompts::kExploration;
  if (allow_abstain_token) return prompts::kAbstainQa;
  return kind == StrategyKind::Direct ? prompts::kStandardQaDirect : prompts::kStandardQaGradual;
}

std::string_view PromptStrategy::feedback_line() const {
  return kind == StrategyKind::Direct ? prompts::kDirectFeedback : prompts::kGradualFeedback;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string answer_text(const Answer& a) {
  struct Visitor {
    std::string operator()(const ChoiceIndex& c) const { return std::to_string(c.value); }
    std::string operator()(const NoneOfTheAbove&) const { return "none of the above"; }
    std::string operator()(const Unparseable&) const { return "unparseable"; }
  };
  return std::visit(Visitor{}, a);
}

std::string render_question_block(const QaItem& item) {
  std::string out = "Question: " + item.question + "\nChoices: [";
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(i) + ": '" + item.choices[i] + "'";
  }
  out += "].";
  return out;
}

std::vector<ChatMessage> build_prompt(const QaItem& item, std::span<const PriorResponse> context,
                                      int turn, const PromptStrategy& strategy) {
  if (turn < 1 || context.size() != static_cast<std::size_t>(turn - 1)) {
    throw ContextLengthMismatch(context.size(), turn);
  }
  std::string user = render_question_block(item);
  for (std::size_t i = 0; i < context.size(); ++i) {
    const auto& prior = context[i];
    if (strategy.kind == StrategyKind::Direct) {
      user += "\nPrevious LLM Answer: Answer: " + prior.answer;
      user += "\nRationale: " + prior.rationale;
    } else {
      const std::string n = std::to_string(i + 1);
      user += "\nLLM Answer " + n + ": " + prior.answer;
      user += "\nRationale " + n + ": " + prior.rationale;
    }
    user += '\n';
    user += strategy.feedback_line();
  }
  return {ChatMessage{Role::System, std::string(strategy.system_prompt(turn))},
          ChatMessage{Role::User, std::move(user)}};
}

namespace {

// Drops ``` fence lines so a fenced reply parses like a bare one.
std::vector<std::string_view> content_lines(std::string_view raw) {
  std::vector<std::string_view> lines;
  for (auto line : detail::split_lines(raw)) {
    if (detail::trim(line).starts_with("```")) continue;
    lines.push_back(line);
  }
  return lines;
}

// Strips markdown emphasis and heading marks in front of a marker, e.g.
// "**Answer:**".
std::string_view strip_decoration(std::string_view s) {
  s = detail::trim(s);
  while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '_')) s.remove_prefix(1);
  return detail::ltrim(s);
}

std::optional<std::size_t> find_marker(std::string_view line, std::string_view marker) {
  const std::string lower = detail::to_lower(strip_decoration(line));
  if (lower.starts_with(marker)) {
    return line.size() - strip_decoration(line).size() + marker.size();
  }
  return std::nullopt;
}

std::optional<ParsedAnswer> parse_answer_value(std::string_view value, std::size_t n_choices,
                                               bool allow_abstain, std::string& why) {
  value = detail::trim(value);
  // "** (2)" after a bold marker: decoration and spaces can interleave.
  while (!value.empty() && std::string_view("*_([{'\" \t").find(value.front()) != std::string_view::npos) {
    value.remove_prefix(1);
  }
  if (!value.empty() && std::isdigit(static_cast<unsigned char>(value.front()))) {
    std::size_t idx = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), idx);
    if (ec != std::errc()) {
      why = "answer index overflow";
      return std::nullopt;
    }
    const std::string_view rest = value.substr(static_cast<std::size_t>(ptr - value.data()));
    if (!rest.empty() && std::isalpha(static_cast<unsigned char>(rest.front()))) {
      why = "answer token is not an index";
      return std::nullopt;
    }
    if (idx >= n_choices) {
      why = "answer index " + std::to_string(idx) + " out of range";
      return std::nullopt;
    }
    return ParsedAnswer{ChoiceIndex{idx}};
  }
  if (detail::to_lower(value).find("none of the above") != std::string::npos) {
    if (allow_abstain) return ParsedAnswer{NoneOfTheAbove{}};
    why = "'none of the above' is not allowed here";
    return std::nullopt;
  }
  why = "no answer index";
  return std::nullopt;
}

}  // namespace

ReasonerResponse parse_response(std::string_view raw, std::size_t n_choices, bool allow_abstain) {
  const auto lines = content_lines(raw);
  std::size_t answer_line = lines.size();
  std::optional<ParsedAnswer> answer;
  std::string why = "no 'Answer:' marker";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (auto off = find_marker(lines[i], "answer:")) {
      answer_line = i;
      answer = parse_answer_value(lines[i].substr(*off), n_choices, allow_abstain, why);
      break;
    }
  }
  if (!answer) throw UnparseableAnswer(std::string(raw), why);

  // Rationale: everything after the first "Rationale:" marker; failing that,
  // whatever follows the answer line.
  std::string rationale;
  bool found = false;
  for (std::size_t i = 0; i < lines.size() && !found; ++i) {
    if (auto off = find_marker(lines[i], "rationale:")) {
      std::string text(lines[i].substr(*off));
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        text += '\n';
        text += lines[j];
      }
      rationale = std::string(detail::trim(detail::ltrim_chars(detail::trim(text), "*_")));
      found = true;
    }
  }
  if (!found) {
    std::string text;
    for (std::size_t j = answer_line + 1; j < lines.size(); ++j) {
      if (!text.empty()) text += '\n';
      text += lines[j];
    }
    rationale = std::string(detail::trim(text));
  }
  return ReasonerResponse{*answer, std::move(rationale), std::string(raw)};
}

void ScriptedReasoner::add(std::string id, int turn, std::string text) {
  table_[{std::move(id), turn}] = std::move(text);
}

ScriptedReasoner ScriptedReasoner::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open fixture file: " + path.string());
  ScriptedReasoner out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::trim(text).empty()) continue;
    try {
      auto j = nlohmann::json::parse(text);
      out.add(j.at("id").get<std::string>(), j.at("turn").get<int>(), j.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FileFormatError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

std::string ScriptedReasoner::generate(const GenerationRequest& request) {
  auto it = table_.find({std::string(request.question_id), request.turn});
  if (it == table_.end()) throw FixtureMissing(std::string(request.question_id), request.turn);
  return it->second;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

StochasticSimReasoner::StochasticSimReasoner(const Dataset& gold, double p_correct, std::uint64_t seed)
    : p_correct_(p_correct), seed_(seed) {
  if (!(p_correct >= 0.0 && p_correct <= 1.0)) {
    throw std::invalid_argument("p_correct must be in [0, 1]");
  }
  gold_.reserve(gold.size());
  for (const auto& item : gold.items()) gold_.emplace(item.id, Entry{item.gold_index, item.choices.size()});
}

std::string StochasticSimReasoner::generate(const GenerationRequest& request) {
  auto it = gold_.find(std::string(request.question_id));
  if (it == gold_.end()) throw FixtureMissing(std::string(request.question_id), request.turn);
  const Entry& e = it->second;

  std::uint64_t s = splitmix64(seed_ ^ fnv1a64(request.question_id));
  s = splitmix64(s ^ static_cast<std::uint64_t>(request.turn));
  std::mt19937_64 rng(s);

  std::size_t answer = e.gold;
  if (!std::bernoulli_distribution(p_correct_)(rng)) {
    std::uniform_int_distribution<std::size_t> pick(0, e.n_choices - 2);
    answer = pick(rng);
    if (answer >= e.gold) ++answer;
  }
  return "Answer: " + std::to_string(answer) + "\nRationale: Simulated reasoning for question " +
         std::string(request.question_id) + " at turn " + std::to_string(request.turn) + ".";
}

}  // namespace drr
