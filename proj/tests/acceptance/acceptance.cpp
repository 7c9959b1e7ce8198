// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "drr/drr.hpp"

namespace fs = std::filesystem;
using namespace drr;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream why;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why << what;
    }
  }
};

struct Criterion {
  std::string name;
  double budget_ms;  // 0 = no runtime limit
  std::function<std::string(Check&)> body;
};

fs::path scratch_dir() {
  auto p = fs::temp_directory_path() / ("drr-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

Dataset synthetic_dataset(std::size_t n, std::size_t n_choices, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<QaItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    QaItem item;
    item.id = "item-" + std::to_string(i);
    item.question = "Synthetic question " + std::to_string(i) + "?";
    for (std::size_t c = 0; c < n_choices; ++c) item.choices.push_back("option " + std::to_string(c));
    item.gold_index = rng() % n_choices;
    items.push_back(std::move(item));
  }
  return Dataset("synthetic", std::move(items));
}

// --- 1 -----------------------------------------------------------------------
std::string fs_arithmetic(Check& c) {
  std::vector<QaItem> items;
  std::vector<InferenceOutcome> outcomes;
  for (int i = 0; i < 1000; ++i) {
    const std::string id = "c" + std::to_string(i);
    items.push_back({id, "?", {"right", "wrong"}, 0});
    const std::size_t ans = i < 735 ? 0 : 1;
    outcomes.push_back({id, Answered{ChoiceIndex{ans}}, {{1, ChoiceIndex{ans}, "", 1.0, Verdict::Accept}}});
  }
  const Dataset gold("csqa", items);
  const std::vector<double> ks{1.0, 3.0};
  const auto r = score_outcomes(outcomes, gold, ks);
  c.expect(r.n_correct == 735 && r.n_incorrect == 265 && r.n_abstain == 0, "counts");
  c.expect(std::abs(r.acc - 73.5) < 1e-9, "Acc != 73.5");
  c.expect(std::abs(r.fs.at(1.0) - 47.0) < 1e-9, "FS(1) != 47.0");
  c.expect(std::abs(r.fs.at(3.0) - (-6.0)) <= 0.2, "FS(3) not within 0.2 of -6.0");
  return "Acc " + fmt(r.acc, 1) + ", FS(1) " + fmt(r.fs.at(1.0), 1) + ", FS(3) " + fmt(r.fs.at(3.0), 1);
}

// --- 2 -----------------------------------------------------------------------
std::string trace_invariants(Check& c, const fs::path& dir) {
  const auto ds = synthetic_dataset(1000, 4, 11);
  StochasticSimReasoner sim(ds, 0.6, 12);
  const auto path = dir / "traces.jsonl";
  const auto summary = distill_dataset(ds, sim, PromptStrategy::direct(), 4, path, 4);
  c.expect(summary.n_failed == 0, "failed items");
  const auto traces = read_traces(path);
  c.expect(traces.size() == 1000, "trace count " + std::to_string(traces.size()));
  std::size_t records = 0;
  for (std::size_t t = 0; t < traces.size() && c.ok; ++t) {
    const auto& tr = traces[t];
    const QaItem& item = ds.at(tr.question_id);
    c.expect(!tr.records.empty() && tr.records.size() <= 4, "trace length for " + tr.question_id);
    for (std::size_t k = 0; k < tr.records.size(); ++k) {
      const auto& rec = tr.records[k];
      ++records;
      c.expect(rec.turn == static_cast<int>(k) + 1, "turn numbering in " + tr.question_id);
      const bool last = k + 1 == tr.records.size();
      // Labels recomputed from gold, independent of the stored label.
      const auto* idx = std::get_if<ChoiceIndex>(&rec.answer);
      const bool correct = idx != nullptr && idx->value == item.gold_index;
      c.expect(rec.label == (correct ? Label::Accept : Label::Reject), "label not re-derivable in " + tr.question_id);
      c.expect(last || rec.label == Label::Reject, "Accept before the end of " + tr.question_id);
      c.expect(rec.context.size() == k, "context length in " + tr.question_id);
      for (std::size_t j = 0; j < k && j < rec.context.size(); ++j) {
        const auto& prev = tr.records[j];
        const auto* pidx = std::get_if<ChoiceIndex>(&prev.answer);
        const std::string text = pidx ? std::to_string(pidx->value) : answer_text(prev.answer);
        c.expect(rec.context[j].answer == text && rec.context[j].rationale == prev.rationale,
                 "context reconstruction in " + tr.question_id);
      }
    }
    const bool accepted = tr.records.back().label == Label::Accept;
    c.expect(accepted ? std::holds_alternative<AcceptedAtTurn>(tr.terminal)
                      : std::holds_alternative<Exhausted>(tr.terminal) && tr.records.size() == 4,
             "terminal of " + tr.question_id);
  }
  return std::to_string(traces.size()) + " traces, " + std::to_string(records) + " records";
}

// --- 3 -----------------------------------------------------------------------
std::string loop_oracle(Check& c) {
  const auto ds = synthetic_dataset(10000, 4, 21);
  StochasticSimReasoner sim(ds, 0.5, 22);
  const OracleCritic oracle(ds);
  InferenceOptions options;
  options.max_turns = 5;
  const auto outcomes = infer_all(ds, sim, oracle, PromptStrategy::direct(), options, 4);
  std::size_t correct = 0;
  for (const auto& o : outcomes) {
    if (const auto* a = std::get_if<Answered>(&o.final)) {
      const bool ok = is_choice(a->answer, ds.at(o.question_id).gold_index);
      c.expect(ok, "oracle accepted a wrong answer");
      correct += ok;
    }
  }
  const double pct = 100.0 * static_cast<double>(correct) / static_cast<double>(ds.size());
  const double expected = 100.0 * (1.0 - std::pow(0.5, 5));
  c.expect(std::abs(pct - expected) <= 1.5, "answered-correct " + fmt(pct) + " vs " + fmt(expected));
  return "answered-correct " + fmt(pct, 2) + "% vs " + fmt(expected, 3) + "%";
}

// --- 4 -----------------------------------------------------------------------
std::string split_hygiene(Check& c) {
  std::mt19937_64 rng(31);
  for (int corpus = 0; corpus < 100 && c.ok; ++corpus) {
    const std::size_t n_ids = 1 + rng() % 400;
    std::vector<DmExample> ex;
    for (std::size_t i = 0; i < n_ids; ++i) {
      const int turns = 1 + static_cast<int>(rng() % 4);
      for (int t = 1; t <= turns; ++t) ex.push_back({"q" + std::to_string(i), t, "x", t == turns});
    }
    std::shuffle(ex.begin(), ex.end(), rng);
    const auto s = split(ex, 0.8, rng());
    std::set<std::string> train_ids;
    std::set<std::string> dev_ids;
    for (const auto& e : s.train) train_ids.insert(e.question_id);
    for (const auto& e : s.dev) dev_ids.insert(e.question_id);
    for (const auto& id : dev_ids) c.expect(!train_ids.contains(id), "id in both splits");
    const auto want = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n_ids) + 0.5));
    c.expect(train_ids.size() == want, "train ids " + std::to_string(train_ids.size()) + " != " +
                                           std::to_string(want) + " for n=" + std::to_string(n_ids));
    c.expect(s.train.size() + s.dev.size() == ex.size(), "examples lost");
  }
  return "100 corpora";
}

// --- 5 -----------------------------------------------------------------------
std::string weighted_loss(Check& c) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    ClassWeights cw{1.0 + static_cast<double>(rng() % 5), 1.0 + static_cast<double>(rng() % 5)};
    auto m = LinearCriticModel::zeros(kMinHashDim, 0.5, cw);
    SparseVector x;
    for (int j = 0; j < 8; ++j) x.emplace_back(static_cast<std::uint32_t>(rng() % kMinHashDim), u(rng));
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end(), [](auto& a, auto& b) { return a.first == b.first; }), x.end());
    for (const auto& [j, v] : x) m.weights[j] = u(rng);
    m.bias = u(rng);
    const int label = static_cast<int>(rng() % 2);
    const auto g = loss_gradient(m, x, label);

    // Oracle: central differences of the loss written out directly.
    auto loss = [&](const LinearCriticModel& mm) {
      double z = mm.bias;
      for (const auto& [j, v] : x) z += mm.weights[j] * v;
      const double p = 1.0 / (1.0 + std::exp(-z));
      return label == 1 ? -cw.accept * std::log(p) : -cw.reject * std::log(1.0 - p);
    };
    const double h = 1e-6;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); };
    for (const auto& [j, gj] : g.weights) {
      auto p = m;
      auto q = m;
      p.weights[j] += h;
      q.weights[j] -= h;
      worst = std::max(worst, rel(gj, (loss(p) - loss(q)) / (2 * h)));
    }
    auto p = m;
    auto q = m;
    p.bias += h;
    q.bias -= h;
    worst = std::max(worst, rel(g.bias, (loss(p) - loss(q)) / (2 * h)));
  }
  c.expect(worst < 1e-5, "gradient rel err " + std::to_string(worst));
  const double l3 = weighted_logistic_loss(0.0, 0, ClassWeights{3.0, 1.0});
  c.expect(std::abs(l3 - 3.0 * std::log(2.0)) < 1e-9, "w=3,p=0.5 loss " + std::to_string(l3));
  const double l1 = weighted_logistic_loss(0.0, 1, ClassWeights{1.0, 3.0});
  c.expect(std::abs(l1 - 3.0 * std::log(2.0)) < 1e-9, "accept-side w=3 loss");
  return "max rel err " + fmt(worst * 1e9, 3) + "e-9, loss " + fmt(l3, 9);
}

// --- 6 -----------------------------------------------------------------------
// Pinned noisy corpus: both classes draw from overlapping vocabularies and 15%
// of labels are flipped, so the decision boundary is genuinely uncertain.
std::vector<DmExample> noisy_corpus(std::size_t n, std::uint64_t seed, const std::string& prefix) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(0.15);
  std::bernoulli_distribution own_vocab(0.6);
  std::vector<DmExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int truth = static_cast<int>(rng() % 2);
    std::string text;
    for (int t = 0; t < 12; ++t) {
      const bool own = own_vocab(rng);
      const int side = own ? truth : 1 - truth;
      text += (side ? "pro" : "con") + std::to_string(rng() % 25) + " ";
      text += "filler" + std::to_string(rng() % 40) + " ";
    }
    const int label = flip(rng) ? 1 - truth : truth;
    out.push_back({prefix + std::to_string(i), 1, text, label});
  }
  return out;
}

std::string weighting_effect(Check& c) {
  const auto train = noisy_corpus(600, 61, "t");
  const auto dev = noisy_corpus(300, 62, "d");
  TrainHyper h;
  h.hash_dim = 1 << 14;
  h.seed = 63;
  h.class_weights = {1.0, 1.0};
  auto [plain, plain_report] = train_linear(train, dev, h);
  h.class_weights = {3.0, 1.0};
  auto [weighted, weighted_report] = train_linear(train, dev, h);
  c.expect(weighted_report.dev_false_positive_count <= plain_report.dev_false_positive_count,
           "weighted FP " + std::to_string(weighted_report.dev_false_positive_count) + " > unweighted " +
               std::to_string(plain_report.dev_false_positive_count));

  std::size_t prev = dev.size() + 1;
  std::string sweep;
  for (int i = 1; i <= 19; ++i) {
    const double t = 0.05 * i;
    const auto fp = evaluate(weighted, dev, t).false_positive;
    c.expect(fp <= prev, "FP rises at threshold " + fmt(t, 2));
    prev = fp;
    if (i % 6 == 3) sweep += (sweep.empty() ? "" : "/") + std::to_string(fp);
  }
  return "dev FP weighted " + std::to_string(weighted_report.dev_false_positive_count) + " vs unweighted " +
         std::to_string(plain_report.dev_false_positive_count) + "; sweep " + sweep;
}

// --- 7 -----------------------------------------------------------------------
class InputLog final : public Critic {
 public:
  explicit InputLog(const Critic& inner) : inner_(inner) {}
  CriticScore assess(std::string_view text, const TurnSideband* sb) const override {
    inputs.emplace_back(text);
    return inner_.assess(text, sb);
  }
  mutable std::vector<std::string> inputs;

 private:
  const Critic& inner_;
};

std::string parity(Check& c, const fs::path& dir) {
  const QaItem item{"p1", "Which gas do plants absorb?", {"oxygen", "nitrogen", "carbon dioxide", "helium"}, 2};
  const Dataset ds("parity", {item});
  ScriptedReasoner script;
  script.add("p1", 1, "Answer: 0\nRationale: Plants breathe oxygen.");
  script.add("p1", 2, "```\n**Answer:** (1)\n**Rationale:** Nitrogen is abundant.   \n```");
  script.add("p1", 3, "Answer: 2\nRationale: Photosynthesis consumes CO2.");
  std::size_t compared = 0;
  for (auto strategy : {PromptStrategy::direct(), PromptStrategy::gradual()}) {
    const auto path = dir / ("parity-" + std::string(to_string(strategy.kind)) + ".jsonl");
    distill_dataset(ds, script, strategy, 4, path, 1);
    const auto records = read_trace_records(path);
    const OracleCritic oracle(ds);
    InputLog log(oracle);
    const auto outcome = infer_item(item, script, log, strategy);
    c.expect(records.size() == 3 && log.inputs.size() == 3, "expected 3 turns on both sides");
    c.expect(std::holds_alternative<Answered>(outcome.final), "inference did not accept turn 3");
    for (std::size_t i = 0; i < std::min(records.size(), log.inputs.size()); ++i) {
      const auto train_side = render_dm_input(item, records[i], kDefaultDmInstruction, strategy.feedback_line());
      c.expect(train_side == log.inputs[i], "turn " + std::to_string(i + 1) + " differs (" +
                                                std::string(to_string(strategy.kind)) + ")");
      ++compared;
    }
  }
  return std::to_string(compared) + " critic inputs byte-identical";
}

// --- 8 -----------------------------------------------------------------------
std::string abstention(Check& c) {
  const auto ds = synthetic_dataset(2000, 5, 81);
  StochasticSimReasoner sim(ds, 0.4, 82);
  InferenceOptions options;
  options.max_turns = 5;
  const auto strategy = PromptStrategy::direct();
  const auto outcomes = infer_all(ds, sim, AlwaysReject{}, strategy, options, 4);
  std::vector<double> ks{0.5, 1.0, 3.0, 10.0};
  const auto r = score_outcomes(outcomes, ds, ks);
  c.expect(r.n_abstain == ds.size(), "not all abstained");
  for (const auto& o : outcomes) c.expect(std::holds_alternative<Abstained>(o.final) && o.turns.size() == 5, "outcome");
  c.expect(r.acc == 0.0, "Acc != 0");
  for (const auto& [k, v] : r.fs) c.expect(v == 0.0, "FS(" + format_k(k) + ") != 0");

  // Oracle: replay each item's 5-turn conversation straight from the reasoner.
  std::size_t wrong_fifth = 0;
  for (const auto& item : ds.items()) {
    std::vector<PriorResponse> ctx;
    std::string raw;
    for (int turn = 1; turn <= 5; ++turn) {
      const auto msgs = build_prompt(item, ctx, turn, strategy);
      raw = sim.generate({item.id, turn, msgs, strategy.params_for_turn(turn)});
      const auto parsed = parse_response(raw, item.choices.size(), strategy.abstain_allowed(turn));
      ctx.push_back({answer_text(widen(parsed.answer)), parsed.rationale});
    }
    const auto fifth = parse_response(raw, item.choices.size(), true);
    if (!(std::holds_alternative<ChoiceIndex>(fifth.answer) &&
          std::get<ChoiceIndex>(fifth.answer).value == item.gold_index)) {
      ++wrong_fifth;
    }
  }
  const double expected = 100.0 * static_cast<double>(wrong_fifth) / static_cast<double>(ds.size());
  c.expect(std::abs(r.acc_d - expected) < 1e-9, "Acc(D) " + fmt(r.acc_d) + " vs " + fmt(expected));
  return "Acc(D) " + fmt(r.acc_d, 2) + " = wrong 5th turn " + fmt(expected, 2);
}

}  // namespace

int main() {
  const fs::path dir = scratch_dir();
  const std::vector<Criterion> criteria{
      {"FS arithmetic (735/265/0 -> Acc 73.5, FS(1) 47.0, FS(3) -6.0)", 1000, fs_arithmetic},
      {"trace invariants (1000 sim items, p=0.6, 4 turns)", 10000, [&](Check& c) { return trace_invariants(c, dir); }},
      {"loop oracle (p=0.5, oracle critic, 5 turns, n=10000)", 30000, loop_oracle},
      {"split hygiene (100 random corpora)", 0, split_hygiene},
      {"weighted loss (gradient check, 3 ln 2)", 0, weighted_loss},
      {"weighting effect (reject-weight 3 FP, threshold sweep)", 0, weighting_effect},
      {"training/inference parity (3-turn fixture)", 0, [&](Check& c) { return parity(c, dir); }},
      {"abstention path (AlwaysReject)", 0, abstention},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& cr = criteria[i];
    Check check;
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    try {
      detail = cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (cr.budget_ms > 0 && ms > cr.budget_ms) {
      check.expect(false, "runtime " + fmt(ms, 0) + " ms over budget " + fmt(cr.budget_ms, 0) + " ms");
    }
    if (!check.ok) ++failed;
    std::printf("%s  AC%zu %s  [%.1f ms]  %s\n", check.ok ? "PASS" : "FAIL", i + 1, cr.name.c_str(), ms,
                check.ok ? detail.c_str() : check.why.str().c_str());
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
