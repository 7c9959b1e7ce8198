#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drr/inference.hpp"
#include "drr/qa_data.hpp"

namespace drr {

// Answer/abstain counts and the derived percentages. `fs` maps each penalty
// k to FS(k) = 100 * (correct - k * incorrect) / n.
struct EvalResult {
  std::size_t n = 0;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  std::size_t n_abstain = 0;
  double acc = 0.0;
  std::map<double, double> fs;
  double acc_d = 0.0;
};

// All percentages are 0 when n == 0.
double accuracy_percent(std::size_t n_correct, std::size_t n);
double formula_score(std::size_t n_correct, std::size_t n_incorrect, std::size_t n_abstain, double k);

// Answered(NoneOfTheAbove) counts as an abstention. Acc(D) scores the
// critic's verdict on each item's last turn. Throws MissingGold.
EvalResult score_outcomes(std::span<const InferenceOutcome> outcomes, const Dataset& gold,
                          std::span<const double> ks);

struct ZeroShotDecision {
  bool answered = true;
  bool correct = false;
};

// (correct answers + abstentions) / n * 100.
double score_zero_shot(std::span<const ZeroShotDecision> decisions);

// {"n", "counts": {...}, "acc", "fs": {"1": x, ...}, "acc_d"}
nlohmann::json to_json(const EvalResult& r);
// Aligned, one decimal place.
std::string format_table(const EvalResult& r, const std::string& label);
std::string format_k(double k);

}  // namespace drr
