#include "drr/trainprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "drr/errors.hpp"
#include "drr/jsonl.hpp"
#include "text_util.hpp"

namespace drr {

namespace {

void push_segment(std::string& out, std::string_view segment) {
  if (!out.empty()) out += '\n';
  out += detail::rtrim(segment);
}

}  // namespace

std::string render_dm_input(const QaItem& item, std::span<const PriorResponse> context, const Answer& answer,
                            std::string_view rationale, std::string_view instruction,
                            std::string_view feedback_line) {
  std::string out;
  push_segment(out, "Instruction: " + std::string(instruction));
  push_segment(out, render_question_block(item));
  for (const auto& prior : context) {
    push_segment(out, "Previous LLM Response: Answer: " + prior.answer);
    push_segment(out, "Rationale: " + prior.rationale);
    push_segment(out, feedback_line);
  }
  push_segment(out, "Answer: " + answer_text(answer));
  push_segment(out, "Rationale: " + std::string(rationale));
  return std::string(detail::rtrim(out));
}

std::string render_dm_input(const QaItem& item, const TurnRecord& record, std::string_view instruction,
                            std::string_view feedback_line) {
  return render_dm_input(item, record.context, record.answer, record.rationale, instruction, feedback_line);
}

DownsampleResult downsample(std::span<const TurnRecord> records, double reject_per_accept, std::uint64_t seed) {
  if (!(reject_per_accept > 0.0)) throw std::invalid_argument("reject_per_accept must be positive");
  DownsampleResult result;
  std::vector<std::size_t> rejects;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::Accept) {
      ++result.n_accept;
    } else {
      rejects.push_back(i);
    }
  }
  result.n_reject_before = rejects.size();
  result.no_accepts = result.n_accept == 0;

  const auto target = static_cast<std::size_t>(std::llround(reject_per_accept * static_cast<double>(result.n_accept)));
  std::vector<bool> keep(records.size(), true);
  if (target < rejects.size()) {
    std::vector<std::size_t> chosen;
    chosen.reserve(target);
    std::mt19937_64 rng(seed);
    std::sample(rejects.begin(), rejects.end(), std::back_inserter(chosen), target, rng);
    for (auto i : rejects) keep[i] = false;
    for (auto i : chosen) keep[i] = true;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!keep[i]) continue;
    if (records[i].label == Label::Reject) ++result.n_reject_kept;
    result.records.push_back(records[i]);
  }
  return result;
}

SplitCorpus split(std::span<const DmExample> examples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& e : examples) {
    if (seen.insert(e.question_id).second) ids.push_back(e.question_id);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  const std::unordered_set<std::string> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));

  SplitCorpus out;
  for (const auto& e : examples) {
    (train_ids.contains(e.question_id) ? out.train : out.dev).push_back(e);
  }
  return out;
}

std::vector<DmExample> make_examples(const Dataset& dataset, std::span<const TurnRecord> records,
                                     std::string_view instruction, std::string_view feedback_line) {
  std::vector<DmExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const QaItem& item = dataset.at(r.question_id);
    out.push_back(DmExample{r.question_id, r.turn, render_dm_input(item, r, instruction, feedback_line),
                            r.label == Label::Accept ? 1 : 0});
  }
  return out;
}

std::size_t export_training_file(std::span<const DmExample> examples, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& e : examples) {
    nlohmann::json j{{"id", e.question_id}, {"turn", e.turn}, {"input", e.input_text}, {"label", e.label}};
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed on " + path.string());
  return examples.size();
}

std::vector<DmExample> read_training_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("training file not found: " + path.string());
  std::vector<DmExample> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    DmExample e{j.at("id").get<std::string>(), j.at("turn").get<int>(), j.at("input").get<std::string>(),
                j.at("label").get<int>()};
    if (e.label != 0 && e.label != 1) {
      throw FileFormatError(path.string() + ":" + std::to_string(line) + ": label must be 0 or 1");
    }
    out.push_back(std::move(e));
  });
  return out;
}

}  // namespace drr
