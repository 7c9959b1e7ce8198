#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drr/answer.hpp"
#include "drr/qa_data.hpp"
#include "drr/reasoner.hpp"

namespace drr {

enum class Label { Accept, Reject };
std::string_view to_string(Label l);

// One reasoning turn {Q, C, A', r} with its gold-derived verdict.
struct TurnRecord {
  std::string question_id;
  int turn = 1;
  std::vector<PriorResponse> context;
  Answer answer;
  std::string raw;
  std::string rationale;
  Label label = Label::Reject;
  bool operator==(const TurnRecord&) const = default;
};

struct AcceptedAtTurn {
  int turn = 1;
  bool operator==(const AcceptedAtTurn&) const = default;
};
struct Exhausted {
  bool operator==(const Exhausted&) const = default;
};
struct Failed {
  std::string reason;
  bool operator==(const Failed&) const = default;
};
using Terminal = std::variant<AcceptedAtTurn, Exhausted, Failed>;

struct Trace {
  std::string question_id;
  std::vector<TurnRecord> records;
  Terminal terminal = Exhausted{};
};

inline constexpr int kDefaultGenerationTurns = 4;

Label label_for(const Answer& answer, const QaItem& item);
// The (answer, rationale) pair a later turn sees for this record.
PriorResponse as_prior(const TurnRecord& record);

// Re-prompts until the gold answer appears or `max_turns` responses have been
// rejected. Backend failures end the trace with Failed and keep the records
// gathered so far.
Trace distill_item(const QaItem& item, Reasoner& reasoner, const PromptStrategy& strategy,
                   int max_turns = kDefaultGenerationTurns);

struct DistillSummary {
  std::size_t n_items = 0;
  std::size_t n_accepted = 0;
  std::size_t n_exhausted = 0;
  std::size_t n_failed = 0;
  std::size_t n_records = 0;
  std::size_t n_skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (id, reason)
};

// Distills every item not already finished in `out_path`, appending each
// finished trace as one block of JSONL lines in dataset order. Failed traces
// are counted and listed but not written, so a re-run retries them.
DistillSummary distill_dataset(const Dataset& dataset, Reasoner& reasoner, const PromptStrategy& strategy,
                               int max_turns, const std::filesystem::path& out_path, int worker_limit);

// Trace-file JSONL encoding. `terminal` is only set on a trace's last line.
nlohmann::json record_to_json(const TurnRecord& record, const Terminal* terminal);
TurnRecord record_from_json(const nlohmann::json& j);
std::string terminal_to_string(const Terminal& t);

// Reads a trace file back into traces, grouped by id in file order.
std::vector<Trace> read_traces(const std::filesystem::path& path);
// Flattened records of all traces.
std::vector<TurnRecord> read_trace_records(const std::filesystem::path& path);

}  // namespace drr
