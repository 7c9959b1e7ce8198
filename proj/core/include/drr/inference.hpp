#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drr/answer.hpp"
#include "drr/critic.hpp"
#include "drr/qa_data.hpp"
#include "drr/reasoner.hpp"
#include "drr/trainprep.hpp"

namespace drr {

inline constexpr int kDefaultInferenceTurns = 5;

struct InferenceTurn {
  int turn = 1;
  Answer answer;
  std::string rationale;
  double p_accept = 0.0;
  Verdict verdict = Verdict::Reject;
  bool operator==(const InferenceTurn&) const = default;
};

// The critic accepted the last turn. An accepted unparseable response is
// kept as Answered(Unparseable) and scored as a wrong answer.
struct Answered {
  Answer answer;
  bool operator==(const Answered&) const = default;
};
struct Abstained {
  bool operator==(const Abstained&) const = default;
};

struct InferenceOutcome {
  std::string question_id;
  std::variant<Answered, Abstained> final = Abstained{};
  std::vector<InferenceTurn> turns;
  bool operator==(const InferenceOutcome&) const = default;
};

struct InferenceOptions {
  int max_turns = kDefaultInferenceTurns;
  std::string instruction = std::string(kDefaultDmInstruction);
};

// Reasoner proposes, critic judges; stops on the first Accept or abstains
// after max_turns Rejects. BackendError propagates to the caller.
InferenceOutcome infer_item(const QaItem& item, Reasoner& reasoner, const Critic& critic,
                            const PromptStrategy& strategy, const InferenceOptions& options = {});

struct InferenceSummary {
  std::size_t n = 0;
  std::size_t n_answered = 0;
  std::size_t n_abstained = 0;
  std::size_t n_failed = 0;
  std::size_t n_skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (id, reason)
};

// Runs every item not already present in `out_path` and appends one outcome
// line per item in dataset order. Items whose backend failed are listed in
// the summary and left for a re-run.
InferenceSummary infer_dataset(const Dataset& dataset, Reasoner& reasoner, const Critic& critic,
                               const PromptStrategy& strategy, const InferenceOptions& options,
                               const std::filesystem::path& out_path, int worker_limit);

// Like infer_dataset without persistence; failed items are dropped from the
// returned outcomes and counted in `summary`.
std::vector<InferenceOutcome> infer_all(const Dataset& dataset, Reasoner& reasoner, const Critic& critic,
                                        const PromptStrategy& strategy, const InferenceOptions& options,
                                        int worker_limit, InferenceSummary* summary = nullptr);

nlohmann::json outcome_to_json(const InferenceOutcome& outcome);
InferenceOutcome outcome_from_json(const nlohmann::json& j);
std::vector<InferenceOutcome> read_outcomes(const std::filesystem::path& path);

}  // namespace drr
