#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drr/distill.hpp"
#include "drr/qa_data.hpp"

namespace drr {

inline constexpr std::string_view kDefaultDmInstruction =
    "Predict if the following answer to the question and context should be accepted, 1, or "
    "rejected, 0, based on the rationale.";

// One labeled critic training example. label 1 = Accept, 0 = Reject.
struct DmExample {
  std::string question_id;
  int turn = 1;
  std::string input_text;
  int label = 0;
  bool operator==(const DmExample&) const = default;
};

struct SplitCorpus {
  std::vector<DmExample> train;
  std::vector<DmExample> dev;
};

// The exact text a critic judges. Used verbatim by training-data export and by
// the inference loop.
std::string render_dm_input(const QaItem& item, std::span<const PriorResponse> context,
                            const Answer& answer, std::string_view rationale,
                            std::string_view instruction, std::string_view feedback_line);
std::string render_dm_input(const QaItem& item, const TurnRecord& record, std::string_view instruction,
                            std::string_view feedback_line);

struct DownsampleResult {
  std::vector<TurnRecord> records;
  std::size_t n_accept = 0;
  std::size_t n_reject_before = 0;
  std::size_t n_reject_kept = 0;
  // Set when there were no Accept records, so every Reject was dropped.
  bool no_accepts = false;
};

// Keeps every Accept; samples round(ratio * n_accept) Rejects uniformly
// without replacement. Relative order is preserved.
DownsampleResult downsample(std::span<const TurnRecord> records, double reject_per_accept,
                            std::uint64_t seed);

// Shuffles unique question ids and gives round(train_fraction * n_ids) to
// train. All turns of an id stay on one side.
SplitCorpus split(std::span<const DmExample> examples, double train_fraction, std::uint64_t seed);

// Throws MissingGold when a record's id is absent from the dataset.
std::vector<DmExample> make_examples(const Dataset& dataset, std::span<const TurnRecord> records,
                                     std::string_view instruction, std::string_view feedback_line);

// JSONL {"id", "turn", "input", "label"}; returns lines written.
std::size_t export_training_file(std::span<const DmExample> examples, const std::filesystem::path& path);
std::vector<DmExample> read_training_file(const std::filesystem::path& path);

}  // namespace drr
