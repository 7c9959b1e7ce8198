#include "drr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drr/errors.hpp"

namespace drr {

double accuracy_percent(std::size_t n_correct, std::size_t n) {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(n_correct) / static_cast<double>(n);
}

double formula_score(std::size_t n_correct, std::size_t n_incorrect, std::size_t n_abstain, double k) {
  const std::size_t n = n_correct + n_incorrect + n_abstain;
  if (n == 0) return 0.0;
  const double raw = static_cast<double>(n_correct) - k * static_cast<double>(n_incorrect);
  return 100.0 * raw / static_cast<double>(n);
}

EvalResult score_outcomes(std::span<const InferenceOutcome> outcomes, const Dataset& gold, std::span<const double> ks) {
  EvalResult r;
  std::size_t good_decisions = 0;
  for (const auto& o : outcomes) {
    const QaItem& item = gold.at(o.question_id);
    ++r.n;
    if (const auto* a = std::get_if<Answered>(&o.final)) {
      if (is_none_of_the_above(a->answer)) {
        ++r.n_abstain;
      } else if (is_choice(a->answer, item.gold_index)) {
        ++r.n_correct;
      } else {
        ++r.n_incorrect;
      }
    } else {
      ++r.n_abstain;
    }
    if (!o.turns.empty()) {
      const auto& last = o.turns.back();
      const bool correct = is_choice(last.answer, item.gold_index);
      if ((last.verdict == Verdict::Accept) == correct) ++good_decisions;
    }
  }
  r.acc = accuracy_percent(r.n_correct, r.n);
  for (double k : ks) r.fs[k] = formula_score(r.n_correct, r.n_incorrect, r.n_abstain, k);
  r.acc_d = accuracy_percent(good_decisions, r.n);
  return r;
}

double score_zero_shot(std::span<const ZeroShotDecision> decisions) {
  std::size_t good = 0;
  for (const auto& d : decisions) {
    if (!d.answered || d.correct) ++good;
  }
  return accuracy_percent(good, decisions.size());
}

std::string format_k(double k) {
  std::ostringstream os;
  os << std::setprecision(15) << k;
  return os.str();
}

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json fs = nlohmann::json::object();
  for (const auto& [k, v] : r.fs) fs[format_k(k)] = v;
  return nlohmann::json{{"n", r.n},
                        {"counts", {{"correct", r.n_correct}, {"incorrect", r.n_incorrect}, {"abstain", r.n_abstain}}},
                        {"acc", r.acc},
                        {"fs", std::move(fs)},
                        {"acc_d", r.acc_d}};
}

std::string format_table(const EvalResult& r, const std::string& label) {
  std::ostringstream head;
  std::ostringstream row;
  head << std::left << std::setw(16) << "dataset" << std::right << std::setw(8) << "n" << std::setw(8) << "Acc";
  row << std::left << std::setw(16) << label << std::right << std::setw(8) << r.n << std::fixed << std::setprecision(1)
      << std::setw(8) << r.acc;
  for (const auto& [k, v] : r.fs) {
    head << std::setw(9) << ("FS(" + format_k(k) + ")");
    row << std::setw(9) << v;
  }
  head << std::setw(9) << "Acc(D)";
  row << std::setw(9) << r.acc_d;
  return head.str() + "\n" + row.str() + "\n";
}

}  // namespace drr
