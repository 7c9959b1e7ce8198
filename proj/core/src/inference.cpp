#include "drr/inference.hpp"

#include <optional>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "drr/distill.hpp"
#include "drr/errors.hpp"
#include "drr/jsonl.hpp"
#include "ordered_pool.hpp"

namespace drr {

InferenceOutcome infer_item(const QaItem& item, Reasoner& reasoner, const Critic& critic,
                            const PromptStrategy& strategy, const InferenceOptions& options) {
  if (options.max_turns < 1) throw std::invalid_argument("max_turns must be >= 1");
  InferenceOutcome outcome;
  outcome.question_id = item.id;
  std::vector<PriorResponse> context;

  for (int turn = 1; turn <= options.max_turns; ++turn) {
    const auto messages = build_prompt(item, context, turn, strategy);
    std::string raw = reasoner.generate(GenerationRequest{item.id, turn, messages, strategy.params_for_turn(turn)});

    InferenceTurn t;
    t.turn = turn;
    try {
      auto parsed = parse_response(raw, item.choices.size(), strategy.abstain_allowed(turn));
      t.answer = widen(parsed.answer);
      t.rationale = std::move(parsed.rationale);
    } catch (const UnparseableAnswer&) {
      t.answer = Unparseable{raw};
      t.rationale = raw;
    }

    const std::string input =
        render_dm_input(item, context, t.answer, t.rationale, options.instruction, strategy.feedback_line());
    const TurnSideband sideband{item.id, turn, &t.answer};
    const CriticScore score = critic.assess(input, &sideband);
    t.p_accept = score.p_accept;
    t.verdict = score.verdict;
    outcome.turns.push_back(t);

    if (score.verdict == Verdict::Accept) {
      outcome.final = Answered{t.answer};
      return outcome;
    }
    context.push_back(PriorResponse{answer_text(t.answer), t.rationale});
  }
  outcome.final = Abstained{};
  return outcome;
}

namespace {

// Runs the items in `todo` and commits successful outcomes in order.
template <typename Commit>
void run_items(const std::vector<const QaItem*>& todo, Reasoner& reasoner, const Critic& critic,
               const PromptStrategy& strategy, const InferenceOptions& options, int worker_limit,
               InferenceSummary& summary, Commit&& commit) {
  struct Result {
    std::optional<InferenceOutcome> outcome;
    std::string error;
  };
  detail::run_ordered(
      todo.size(), worker_limit,
      [&](std::size_t i) -> Result {
        try {
          return {infer_item(*todo[i], reasoner, critic, strategy, options), {}};
        } catch (const BackendError& e) {
          return {std::nullopt, e.what()};
        }
      },
      [&](std::size_t i, Result r) {
        if (!r.outcome) {
          ++summary.n_failed;
          summary.failures.emplace_back(todo[i]->id, r.error);
          return;
        }
        if (std::holds_alternative<Answered>(r.outcome->final)) {
          ++summary.n_answered;
        } else {
          ++summary.n_abstained;
        }
        commit(std::move(*r.outcome));
      });
}

nlohmann::json answer_json(const Answer& a) {
  if (const auto* c = std::get_if<ChoiceIndex>(&a)) return c->value;
  if (is_none_of_the_above(a)) return "none_of_the_above";
  return nullptr;
}

Answer answer_from(const nlohmann::json& j, const std::string& rationale) {
  if (j.is_null()) return Unparseable{rationale};
  if (j.is_number_integer()) return ChoiceIndex{j.get<std::size_t>()};
  if (j.is_string() && j.get<std::string>() == "none_of_the_above") return NoneOfTheAbove{};
  throw FileFormatError("bad answer value: " + j.dump());
}

}  // namespace

std::vector<InferenceOutcome> infer_all(const Dataset& dataset, Reasoner& reasoner, const Critic& critic,
                                        const PromptStrategy& strategy, const InferenceOptions& options,
                                        int worker_limit, InferenceSummary* summary) {
  std::vector<const QaItem*> todo;
  for (const auto& item : dataset.items()) todo.push_back(&item);
  InferenceSummary local;
  local.n = dataset.size();
  std::vector<InferenceOutcome> out;
  out.reserve(todo.size());
  run_items(todo, reasoner, critic, strategy, options, worker_limit, local,
            [&](InferenceOutcome o) { out.push_back(std::move(o)); });
  if (summary) *summary = std::move(local);
  return out;
}

InferenceSummary infer_dataset(const Dataset& dataset, Reasoner& reasoner, const Critic& critic,
                               const PromptStrategy& strategy, const InferenceOptions& options,
                               const std::filesystem::path& out_path, int worker_limit) {
  JsonlAppender sink(out_path);
  std::unordered_set<std::string> done;
  for_each_jsonl(out_path, [&](const nlohmann::json& j, std::size_t) { done.insert(j.at("id").get<std::string>()); });

  InferenceSummary summary;
  summary.n = dataset.size();
  std::vector<const QaItem*> todo;
  for (const auto& item : dataset.items()) {
    if (done.contains(item.id)) {
      ++summary.n_skipped;
    } else {
      todo.push_back(&item);
    }
  }
  run_items(todo, reasoner, critic, strategy, options, worker_limit, summary,
            [&](const InferenceOutcome& o) { sink.append(outcome_to_json(o).dump() + "\n"); });
  return summary;
}

nlohmann::json outcome_to_json(const InferenceOutcome& outcome) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : outcome.turns) {
    turns.push_back({{"turn", t.turn},
                     {"answer", answer_json(t.answer)},
                     {"rationale", t.rationale},
                     {"p_accept", t.p_accept},
                     {"verdict", std::string(to_string(t.verdict))}});
  }
  const auto* answered = std::get_if<Answered>(&outcome.final);
  return nlohmann::json{{"id", outcome.question_id},
                        {"final", answered ? "answered" : "abstained"},
                        {"answer", answered ? answer_json(answered->answer) : nlohmann::json(nullptr)},
                        {"turns", std::move(turns)}};
}

InferenceOutcome outcome_from_json(const nlohmann::json& j) {
  InferenceOutcome o;
  o.question_id = j.at("id").get<std::string>();
  for (const auto& t : j.at("turns")) {
    InferenceTurn turn;
    turn.turn = t.at("turn").get<int>();
    turn.rationale = t.at("rationale").get<std::string>();
    turn.answer = answer_from(t.at("answer"), turn.rationale);
    turn.p_accept = t.at("p_accept").get<double>();
    const auto v = t.at("verdict").get<std::string>();
    if (v != "accept" && v != "reject") throw FileFormatError("bad verdict: " + v);
    turn.verdict = v == "accept" ? Verdict::Accept : Verdict::Reject;
    o.turns.push_back(std::move(turn));
  }
  const auto final = j.at("final").get<std::string>();
  if (final == "answered") {
    if (o.turns.empty()) throw FileFormatError("answered outcome without turns: " + o.question_id);
    o.final = Answered{o.turns.back().answer};
  } else if (final == "abstained") {
    o.final = Abstained{};
  } else {
    throw FileFormatError("bad final: " + final);
  }
  return o;
}

std::vector<InferenceOutcome> read_outcomes(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("outcome file not found: " + path.string());
  std::vector<InferenceOutcome> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) { out.push_back(outcome_from_json(j)); });
  return out;
}

}  // namespace drr
