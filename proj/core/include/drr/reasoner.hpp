#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "drr/answer.hpp"
#include "drr/qa_data.hpp"

namespace drr {

struct GenerationParams {
  double temperature = 0.6;
  double top_p = 0.9;
  int max_new_tokens = 512;
  std::optional<std::uint64_t> seed;

  // Throws std::invalid_argument when temperature < 0, top_p outside (0, 1]
  // or max_new_tokens < 1.
  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

enum class StrategyKind { Direct, Gradual };

std::string_view to_string(StrategyKind kind);
// Accepts "direct" / "gradual" (case-insensitive); throws std::invalid_argument.
StrategyKind parse_strategy_kind(std::string_view text);

// Selects the system prompt, the feedback line appended after each rejected
// turn, and the sampling parameters for each turn. The same strategy must be
// used to produce training traces and to run inference.
struct PromptStrategy {
  StrategyKind kind = StrategyKind::Direct;
  GenerationParams turn1_params;
  GenerationParams later_params;
  // Replaces the standard QA system prompt with the variant that offers
  // "none of the above".
  bool allow_abstain_token = false;

  // Direct: 0.1 / 0.9 on turn 1, 0.6 / 0.7 afterwards.
  static PromptStrategy direct();
  // Gradual: 0.6 / 0.9 on every turn.
  static PromptStrategy gradual();
  static PromptStrategy for_kind(StrategyKind kind);

  const GenerationParams& params_for_turn(int turn) const {
    return turn <= 1 ? turn1_params : later_params;
  }
  // Whether "none of the above" is a legal answer at this turn. The Direct
  // exploration prompt always offers it.
  bool abstain_allowed(int turn) const;
  std::string_view system_prompt(int turn) const;
  std::string_view feedback_line() const;
};

namespace prompts {
extern const std::string_view kStandardQaDirect;
extern const std::string_view kStandardQaGradual;
extern const std::string_view kAbstainQa;
extern const std::string_view kExploration;
extern const std::string_view kDirectFeedback;
extern const std::string_view kGradualFeedback;
}  // namespace prompts

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

// One earlier (answer, rationale) pair shown to the reasoner and the critic.
struct PriorResponse {
  std::string answer;
  std::string rationale;
  bool operator==(const PriorResponse&) const = default;
};

struct ReasonerResponse {
  ParsedAnswer answer;
  std::string rationale;
  std::string raw_text;
};

// "Question: ...\nChoices: [0: 'a', 1: 'b']." -- shared by prompts and the
// critic input so both see the same rendering.
std::string render_question_block(const QaItem& item);

std::vector<ChatMessage> build_prompt(const QaItem& item, std::span<const PriorResponse> context,
                                      int turn, const PromptStrategy& strategy);

ReasonerResponse parse_response(std::string_view raw, std::size_t n_choices, bool allow_abstain);

// Everything a backend receives for one completion. `question_id` and
// `turn` are routing metadata for replay and simulation backends; remote
// backends send only the messages and params.
struct GenerationRequest {
  std::string_view question_id;
  int turn = 1;
  std::span<const ChatMessage> messages;
  GenerationParams params;
};

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  // Must be safe to call from several threads at once.
  virtual std::string generate(const GenerationRequest& request) = 0;
};

// Replays canned completions keyed by (question id, turn).
class ScriptedReasoner final : public Reasoner {
 public:
  ScriptedReasoner() = default;
  explicit ScriptedReasoner(std::map<std::pair<std::string, int>, std::string> table)
      : table_(std::move(table)) {}

  // JSONL of {id, turn, text}.
  static ScriptedReasoner from_file(const std::filesystem::path& path);

  void add(std::string id, int turn, std::string text);
  std::string generate(const GenerationRequest& request) override;

 private:
  std::map<std::pair<std::string, int>, std::string> table_;
};

// Answers correctly with probability `p_correct`, otherwise picks a wrong
// choice uniformly. Each (id, turn) draws from its own substream of the
// master seed so results do not depend on scheduling.
class StochasticSimReasoner final : public Reasoner {
 public:
  StochasticSimReasoner(const Dataset& gold, double p_correct, std::uint64_t seed);

  std::string generate(const GenerationRequest& request) override;

  double p_correct() const noexcept { return p_correct_; }

 private:
  struct Entry {
    std::size_t gold;
    std::size_t n_choices;
  };
  std::unordered_map<std::string, Entry> gold_;
  double p_correct_;
  std::uint64_t seed_;
};

// Stable 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace drr
