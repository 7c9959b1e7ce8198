#include "drr/distill.hpp"

#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "drr/errors.hpp"
#include "drr/jsonl.hpp"
#include "ordered_pool.hpp"

namespace drr {

std::string_view to_string(Label l) { return l == Label::Accept ? "accept" : "reject"; }

Label label_for(const Answer& answer, const QaItem& item) {
  return is_choice(answer, item.gold_index) ? Label::Accept : Label::Reject;
}

PriorResponse as_prior(const TurnRecord& record) {
  return PriorResponse{answer_text(record.answer), record.rationale};
}

Trace distill_item(const QaItem& item, Reasoner& reasoner, const PromptStrategy& strategy, int max_turns) {
  if (max_turns < 1) throw std::invalid_argument("max_turns must be >= 1");
  Trace trace{item.id, {}, Exhausted{}};
  std::vector<PriorResponse> context;
  for (int turn = 1; turn <= max_turns; ++turn) {
    const auto messages = build_prompt(item, context, turn, strategy);
    std::string raw;
    try {
      raw = reasoner.generate(GenerationRequest{item.id, turn, messages, strategy.params_for_turn(turn)});
    } catch (const BackendError& e) {
      trace.terminal = Failed{e.what()};
      return trace;
    }

    TurnRecord rec;
    rec.question_id = item.id;
    rec.turn = turn;
    rec.context = context;
    try {
      auto parsed = parse_response(raw, item.choices.size(), strategy.abstain_allowed(turn));
      rec.answer = widen(parsed.answer);
      rec.rationale = std::move(parsed.rationale);
    } catch (const UnparseableAnswer&) {
      rec.answer = Unparseable{raw};
      rec.rationale = raw;
    }
    rec.raw = std::move(raw);
    rec.label = label_for(rec.answer, item);
    trace.records.push_back(std::move(rec));

    const TurnRecord& last = trace.records.back();
    if (last.label == Label::Accept) {
      trace.terminal = AcceptedAtTurn{turn};
      return trace;
    }
    context.push_back(as_prior(last));
  }
  return trace;
}

std::string terminal_to_string(const Terminal& t) {
  struct Visitor {
    std::string operator()(const AcceptedAtTurn&) const { return "accepted"; }
    std::string operator()(const Exhausted&) const { return "exhausted"; }
    std::string operator()(const Failed& f) const { return "failed: " + f.reason; }
  };
  return std::visit(Visitor{}, t);
}

namespace {

nlohmann::json answer_to_json(const Answer& a) {
  if (const auto* c = std::get_if<ChoiceIndex>(&a)) return c->value;
  if (is_none_of_the_above(a)) return "none_of_the_above";
  return nullptr;
}

Answer answer_from_json(const nlohmann::json& j, const std::string& raw) {
  if (j.is_null()) return Unparseable{raw};
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v < 0) throw FileFormatError("negative answer index");
    return ChoiceIndex{static_cast<std::size_t>(v)};
  }
  if (j.is_string() && j.get<std::string>() == "none_of_the_above") return NoneOfTheAbove{};
  throw FileFormatError("bad answer value: " + j.dump());
}

Label label_from_string(const std::string& s) {
  if (s == "accept") return Label::Accept;
  if (s == "reject") return Label::Reject;
  throw FileFormatError("bad label: " + s);
}

}  // namespace

nlohmann::json record_to_json(const TurnRecord& record, const Terminal* terminal) {
  nlohmann::json context = nlohmann::json::array();
  for (const auto& p : record.context) context.push_back({{"answer", p.answer}, {"rationale", p.rationale}});
  nlohmann::json j;
  j["id"] = record.question_id;
  j["turn"] = record.turn;
  j["context"] = std::move(context);
  j["answer"] = answer_to_json(record.answer);
  j["raw"] = record.raw;
  j["rationale"] = record.rationale;
  j["label"] = std::string(to_string(record.label));
  j["terminal"] = terminal ? nlohmann::json(terminal_to_string(*terminal)) : nlohmann::json(nullptr);
  return j;
}

TurnRecord record_from_json(const nlohmann::json& j) {
  TurnRecord rec;
  rec.question_id = j.at("id").get<std::string>();
  rec.turn = j.at("turn").get<int>();
  for (const auto& p : j.at("context")) {
    rec.context.push_back({p.at("answer").get<std::string>(), p.at("rationale").get<std::string>()});
  }
  rec.raw = j.at("raw").get<std::string>();
  rec.answer = answer_from_json(j.at("answer"), rec.raw);
  rec.rationale = j.at("rationale").get<std::string>();
  rec.label = label_from_string(j.at("label").get<std::string>());
  return rec;
}

std::vector<Trace> read_traces(const std::filesystem::path& path) {
  std::vector<Trace> traces;
  Trace open;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    TurnRecord rec = record_from_json(j);
    if (!open.records.empty() && open.question_id != rec.question_id) {
      throw FileFormatError(path.string() + ":" + std::to_string(line) + ": trace for '" +
                            open.question_id + "' has no terminal line");
    }
    open.question_id = rec.question_id;
    const int turn = rec.turn;
    open.records.push_back(std::move(rec));
    const auto& term = j.at("terminal");
    if (term.is_null()) return;
    const auto text = term.get<std::string>();
    if (text == "accepted") {
      open.terminal = AcceptedAtTurn{turn};
    } else if (text == "exhausted") {
      open.terminal = Exhausted{};
    } else if (text.starts_with("failed")) {
      open.terminal = Failed{text.size() > 8 ? text.substr(8) : std::string()};
    } else {
      throw FileFormatError(path.string() + ":" + std::to_string(line) + ": bad terminal '" + text + "'");
    }
    traces.push_back(std::move(open));
    open = Trace{};
  });
  return traces;
}

std::vector<TurnRecord> read_trace_records(const std::filesystem::path& path) {
  std::vector<TurnRecord> out;
  for (auto& t : read_traces(path)) {
    for (auto& r : t.records) out.push_back(std::move(r));
  }
  return out;
}

DistillSummary distill_dataset(const Dataset& dataset, Reasoner& reasoner, const PromptStrategy& strategy,
                               int max_turns, const std::filesystem::path& out_path, int worker_limit) {
  if (max_turns < 1) throw std::invalid_argument("max_turns must be >= 1");
  JsonlAppender sink(out_path);

  std::unordered_set<std::string> done;
  for (const auto& t : read_traces(out_path)) {
    if (!std::holds_alternative<Failed>(t.terminal)) done.insert(t.question_id);
  }

  DistillSummary summary;
  summary.n_items = dataset.size();
  std::vector<const QaItem*> todo;
  for (const auto& item : dataset.items()) {
    if (done.contains(item.id)) {
      ++summary.n_skipped;
    } else {
      todo.push_back(&item);
    }
  }

  detail::run_ordered(
      todo.size(), worker_limit,
      [&](std::size_t i) { return distill_item(*todo[i], reasoner, strategy, max_turns); },
      [&](std::size_t, Trace trace) {
        if (const auto* f = std::get_if<Failed>(&trace.terminal)) {
          ++summary.n_failed;
          summary.failures.emplace_back(trace.question_id, f->reason);
          return;
        }
        std::string block;
        for (std::size_t k = 0; k < trace.records.size(); ++k) {
          const bool last = k + 1 == trace.records.size();
          block += record_to_json(trace.records[k], last ? &trace.terminal : nullptr).dump();
          block += '\n';
        }
        sink.append(block);
        summary.n_records += trace.records.size();
        if (std::holds_alternative<AcceptedAtTurn>(trace.terminal)) {
          ++summary.n_accepted;
        } else {
          ++summary.n_exhausted;
        }
      });
  return summary;
}

}  // namespace drr
