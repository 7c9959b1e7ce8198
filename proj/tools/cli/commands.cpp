#include "commands.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drr/drr.hpp"

namespace drr::cli {

namespace fs = std::filesystem;

namespace {

// --- option groups ---------------------------------------------------------

struct StrategyOpts {
  std::string kind = "direct";
  bool allow_abstain = false;
  std::optional<double> turn1_temperature;
  std::optional<double> turn1_top_p;
  std::optional<double> later_temperature;
  std::optional<double> later_top_p;
  int max_new_tokens = 512;
  std::optional<std::uint64_t> request_seed;

  void add_to(CLI::App* app) {
    app->add_option("--strategy", kind, "Prompt strategy: direct | gradual")->capture_default_str();
    app->add_flag("--allow-abstain", allow_abstain, "Offer 'none of the above' in the QA prompt");
    app->add_option("--turn1-temperature", turn1_temperature, "Override turn-1 temperature");
    app->add_option("--turn1-top-p", turn1_top_p, "Override turn-1 top-p");
    app->add_option("--later-temperature", later_temperature, "Override temperature for turns >= 2");
    app->add_option("--later-top-p", later_top_p, "Override top-p for turns >= 2");
    app->add_option("--max-new-tokens", max_new_tokens, "Completion token budget")->capture_default_str();
    app->add_option("--request-seed", request_seed, "Sampling seed forwarded to the remote backend");
  }

  PromptStrategy build() const {
    PromptStrategy s = PromptStrategy::for_kind(parse_strategy_kind(kind));
    s.allow_abstain_token = allow_abstain;
    if (turn1_temperature) s.turn1_params.temperature = *turn1_temperature;
    if (turn1_top_p) s.turn1_params.top_p = *turn1_top_p;
    if (later_temperature) s.later_params.temperature = *later_temperature;
    if (later_top_p) s.later_params.top_p = *later_top_p;
    for (auto* p : {&s.turn1_params, &s.later_params}) {
      p->max_new_tokens = max_new_tokens;
      p->seed = request_seed;
      p->validate();
    }
    return s;
  }
};

struct BackendOpts {
  std::string backend = "remote";
  std::string fixtures;
  std::string url;
  std::string model;
  double p = 0.5;
  std::size_t max_in_flight = 4;
  int retries = 3;
  int backoff_ms = 1000;

  void add_to(CLI::App* app) {
    app->add_option("--backend", backend, "Reasoner backend: remote | scripted | sim")->capture_default_str();
    app->add_option("--fixtures", fixtures, "Scripted backend fixture JSONL {id, turn, text}");
    app->add_option("--url", url, "Chat-completion endpoint for the remote backend");
    app->add_option("--model", model, "Model name sent to the remote backend");
    app->add_option("--p", p, "Probability of a correct answer for the sim backend")->capture_default_str();
    app->add_option("--max-in-flight", max_in_flight, "Remote request concurrency cap")->capture_default_str();
    app->add_option("--retries", retries, "Remote retries on transport errors and 429/5xx")->capture_default_str();
    app->add_option("--backoff-ms", backoff_ms, "Initial retry delay; doubles per retry")->capture_default_str();
  }

  std::unique_ptr<Reasoner> build(const Dataset& gold, std::uint64_t seed) const {
    if (backend == "scripted") {
      if (fixtures.empty()) throw std::invalid_argument("--backend scripted needs --fixtures");
      return std::make_unique<ScriptedReasoner>(ScriptedReasoner::from_file(fixtures));
    }
    if (backend == "sim") return std::make_unique<StochasticSimReasoner>(gold, p, seed);
    if (backend == "remote") {
      if (url.empty()) throw std::invalid_argument("--backend remote needs --url");
      RemoteChatConfig cfg;
      cfg.url = url;
      cfg.model = model;
      cfg.max_in_flight = max_in_flight;
      cfg.retry.max_retries = retries;
      cfg.retry.initial_delay = std::chrono::milliseconds(backoff_ms);
      cfg.with_env_api_key();
      return std::make_unique<RemoteChatReasoner>(std::move(cfg));
    }
    throw std::invalid_argument("unknown backend '" + backend + "' (remote|scripted|sim)");
  }
};

// --- output helpers --------------------------------------------------------

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path sidecar(const fs::path& out, std::string_view suffix) { return fs::path(out.string() + std::string(suffix)); }

// Writes the effective configuration of `sub` in the --config format, so
// `drr --config <manifest> <command>` repeats the run.
void write_manifest(const CLI::App& app, const CLI::App& sub, const fs::path& path) {
  const std::string prefix = sub.get_name() + ".";
  std::ostringstream body;
  body << "# drr " << kVersion << " run manifest\n";
  body << "# reproduce with: drr --config " << path.filename().string() << ' ' << sub.get_name() << "\n";
  std::istringstream all(app.config_to_str(true, false));
  std::string line;
  while (std::getline(all, line)) {
    if (!line.starts_with(prefix)) continue;
    if (line.ends_with("=\"\"")) continue;
    body << line << '\n';
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << body.str();
}

nlohmann::json failures_json(const std::vector<std::pair<std::string, std::string>>& failures) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, why] : failures) arr.push_back({{"id", id}, {"reason", why}});
  return arr;
}

Dataset load_named(const std::string& path) { return load_dataset(path, fs::path(path).stem().string()); }

// --- commands --------------------------------------------------------------

struct DistillCmd {
  std::string dataset;
  std::string out;
  int max_turns = kDefaultGenerationTurns;
  std::uint64_t seed = 0;
  int workers = 1;
  StrategyOpts strategy;
  BackendOpts backend;

  CLI::App* attach(CLI::App& app) {
    auto* sub = app.add_subcommand("distill", "Generate labeled reasoning traces");
    sub->add_option("--dataset", dataset, "QA dataset JSONL")->required();
    sub->add_option("--out", out, "Trace JSONL (appended; finished ids are skipped)")->required();
    sub->add_option("--max-turns", max_turns, "Turns before a trace is exhausted")->capture_default_str();
    sub->add_option("--seed", seed, "Seed for the sim backend")->capture_default_str();
    sub->add_option("--workers", workers, "Items processed concurrently")->capture_default_str();
    strategy.add_to(sub);
    backend.add_to(sub);
    return sub;
  }

  int run(const CLI::App& app, const CLI::App& sub, std::ostream& out_s) const {
    const Dataset ds = load_named(dataset);
    const PromptStrategy s = strategy.build();
    auto reasoner = backend.build(ds, seed);
    const auto summary = distill_dataset(ds, *reasoner, s, max_turns, out, workers);
    const bool partial = summary.n_failed > 0;
    write_json(sidecar(out, ".summary.json"),
               {{"dataset", ds.name()},
                {"status", partial ? "partial" : "complete"},
                {"n_items", summary.n_items},
                {"n_accepted", summary.n_accepted},
                {"n_exhausted", summary.n_exhausted},
                {"n_failed", summary.n_failed},
                {"n_records", summary.n_records},
                {"skipped", summary.n_skipped},
                {"failures", failures_json(summary.failures)}});
    write_manifest(app, sub, sidecar(out, ".manifest"));
    out_s << "distill " << ds.name() << ": items " << summary.n_items << ", records " << summary.n_records
          << ", accepted " << summary.n_accepted << ", exhausted " << summary.n_exhausted << ", failed "
          << summary.n_failed << ", skipped: " << summary.n_skipped << "\n";
    return partial ? kRuntime : kOk;
  }
};

struct PrepareCmd {
  std::vector<std::string> traces;
  std::vector<std::string> datasets;
  std::string out;
  std::string strategy = "direct";
  double reject_per_accept = 1.0;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::string instruction = std::string(kDefaultDmInstruction);

  CLI::App* attach(CLI::App& app) {
    auto* sub = app.add_subcommand("prepare", "Build critic train/dev files from traces");
    sub->add_option("--traces", traces, "Trace files, one per dataset")->required()->delimiter(',');
    sub->add_option("--dataset", datasets, "Dataset files matching --traces")->required()->delimiter(',');
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--strategy", strategy, "Strategy the traces were generated with")->capture_default_str();
    sub->add_option("--reject-per-accept", reject_per_accept, "Reject:Accept ratio kept")->capture_default_str();
    sub->add_option("--train-fraction", train_fraction, "Share of question ids in train")->capture_default_str();
    sub->add_option("--seed", seed, "Sampling and split seed")->capture_default_str();
    sub->add_option("--instruction", instruction, "Critic instruction line")->capture_default_str();
    return sub;
  }

  int run(const CLI::App& app, const CLI::App& sub, std::ostream& out_s) const {
    if (traces.size() != datasets.size()) {
      throw std::invalid_argument("--traces and --dataset must list the same number of files");
    }
    const PromptStrategy s = PromptStrategy::for_kind(parse_strategy_kind(strategy));
    SplitCorpus all;
    nlohmann::json per_dataset = nlohmann::json::array();
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const Dataset ds = load_named(datasets[i]);
      if (!fs::exists(traces[i])) throw IoError("trace file not found: " + traces[i]);
      const auto records = read_trace_records(traces[i]);
      if (records.empty()) throw EmptyCorpus("no finished traces in " + traces[i]);
      const auto sampled = downsample(records, reject_per_accept, seed);
      const auto examples = make_examples(ds, sampled.records, instruction, s.feedback_line());
      auto corpus = split(examples, train_fraction, seed);
      per_dataset.push_back({{"dataset", ds.name()},
                             {"records", records.size()},
                             {"accept", sampled.n_accept},
                             {"reject_before", sampled.n_reject_before},
                             {"reject_kept", sampled.n_reject_kept},
                             {"train", corpus.train.size()},
                             {"dev", corpus.dev.size()},
                             {"warning", sampled.no_accepts ? "no Accept records; all Rejects dropped" : ""}});
      if (sampled.no_accepts) out_s << "warning: " << ds.name() << " has no Accept records\n";
      std::move(corpus.train.begin(), corpus.train.end(), std::back_inserter(all.train));
      std::move(corpus.dev.begin(), corpus.dev.end(), std::back_inserter(all.dev));
    }
    const fs::path dir(out);
    const auto n_train = export_training_file(all.train, dir / "train.jsonl");
    const auto n_dev = export_training_file(all.dev, dir / "dev.jsonl");
    write_json(dir / "prepare_summary.json",
               {{"train", n_train}, {"dev", n_dev}, {"seed", seed}, {"datasets", per_dataset}});
    write_manifest(app, sub, dir / "run.manifest");
    out_s << "prepare: train " << n_train << ", dev " << n_dev << " -> " << dir.string() << "\n";
    return kOk;
  }
};

struct TrainCriticCmd {
  std::string train;
  std::string dev;
  std::string out;
  TrainHyper hyper;

  CLI::App* attach(CLI::App& app) {
    auto* sub = app.add_subcommand("train-critic", "Train the hashed logistic critic");
    sub->add_option("--train", train, "Training JSONL")->required();
    sub->add_option("--dev", dev, "Dev JSONL")->required();
    sub->add_option("--out", out, "Model file")->required();
    sub->add_option("--lr", hyper.lr, "SGD step size")->capture_default_str();
    sub->add_option("--epochs", hyper.epochs, "Passes over the training set")->capture_default_str();
    sub->add_option("--reject-weight", hyper.class_weights.reject, "Loss weight of Reject examples")
        ->capture_default_str();
    sub->add_option("--accept-weight", hyper.class_weights.accept, "Loss weight of Accept examples")
        ->capture_default_str();
    sub->add_option("--hash-dim", hyper.hash_dim, "Feature buckets (power of two)")->capture_default_str();
    sub->add_option("--threshold", hyper.threshold, "Accept threshold on p(accept)")->capture_default_str();
    sub->add_option("--seed", hyper.seed, "Shuffle seed")->capture_default_str();
    return sub;
  }

  int run(const CLI::App& app, const CLI::App& sub, std::ostream& out_s) const {
    auto [model, report] = train_linear(fs::path(train), fs::path(dev), hyper);
    save_model(model, out);
    write_json(sidecar(out, ".report.json"), {{"epochs_run", report.epochs_run},
                                              {"final_train_loss", report.final_train_loss},
                                              {"dev_accuracy", report.dev_accuracy},
                                              {"dev_false_positive_count", report.dev_false_positive_count},
                                              {"dev_false_negative_count", report.dev_false_negative_count},
                                              {"dev_size", report.dev_size}});
    write_manifest(app, sub, sidecar(out, ".manifest"));
    out_s << "train-critic: epochs " << report.epochs_run << ", train loss " << report.final_train_loss
          << ", dev_accuracy " << report.dev_accuracy << ", dev FP " << report.dev_false_positive_count
          << ", dev FN " << report.dev_false_negative_count << "\n";
    return kOk;
  }
};

struct InferCmd {
  std::string dataset;
  std::string out;
  std::string critic = "oracle";
  int max_turns = kDefaultInferenceTurns;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string instruction = std::string(kDefaultDmInstruction);
  StrategyOpts strategy;
  BackendOpts backend;

  CLI::App* attach(CLI::App& app) {
    auto* sub = app.add_subcommand("infer", "Run the reasoner/critic loop");
    sub->add_option("--dataset", dataset, "QA dataset JSONL")->required();
    sub->add_option("--out", out, "Outcome JSONL (appended; finished ids are skipped)")->required();
    sub->add_option("--critic", critic, "oracle | accept | reject | linear:<model> | remote:<url>")
        ->capture_default_str();
    sub->add_option("--max-turns", max_turns, "Turns before abstaining")->capture_default_str();
    sub->add_option("--seed", seed, "Seed for the sim backend")->capture_default_str();
    sub->add_option("--workers", workers, "Items processed concurrently")->capture_default_str();
    sub->add_option("--instruction", instruction, "Critic instruction line")->capture_default_str();
    strategy.add_to(sub);
    backend.add_to(sub);
    return sub;
  }

  int run(const CLI::App& app, const CLI::App& sub, std::ostream& out_s) const {
    const Dataset ds = load_named(dataset);
    const PromptStrategy s = strategy.build();
    auto reasoner = backend.build(ds, seed);
    auto judge = make_critic(critic, &ds);
    InferenceOptions options{max_turns, instruction};
    const auto summary = infer_dataset(ds, *reasoner, *judge, s, options, out, workers);
    const bool partial = summary.n_failed > 0;
    write_json(sidecar(out, ".summary.json"), {{"dataset", ds.name()},
                                               {"status", partial ? "partial" : "complete"},
                                               {"n", summary.n},
                                               {"n_answered", summary.n_answered},
                                               {"n_abstained", summary.n_abstained},
                                               {"n_failed", summary.n_failed},
                                               {"skipped", summary.n_skipped},
                                               {"failures", failures_json(summary.failures)}});
    write_manifest(app, sub, sidecar(out, ".manifest"));
    out_s << "infer " << ds.name() << ": n " << summary.n << ", answered " << summary.n_answered << ", abstained "
          << summary.n_abstained << ", failed " << summary.n_failed << ", skipped: " << summary.n_skipped << "\n";
    return partial ? kRuntime : kOk;
  }
};

struct EvalCmd {
  std::string dataset;
  std::string outcomes;
  std::string out;
  std::vector<double> ks{1.0, 3.0};
  bool json = false;

  CLI::App* attach(CLI::App& app) {
    auto* sub = app.add_subcommand("eval", "Score outcomes: Acc, FS(k), Acc(D)");
    sub->add_option("--dataset", dataset, "QA dataset JSONL with gold answers")->required();
    sub->add_option("--outcomes", outcomes, "Outcome JSONL from infer")->required();
    sub->add_option("--out", out, "Write the JSON report here");
    sub->add_option("--ks", ks, "Formula-score penalties")->delimiter(',')->capture_default_str();
    sub->add_flag("--json", json, "Print the JSON report instead of the table");
    return sub;
  }

  int run(const CLI::App& app, const CLI::App& sub, std::ostream& out_s) const {
    const Dataset ds = load_named(dataset);
    const auto results = read_outcomes(outcomes);
    const EvalResult r = score_outcomes(results, ds, ks);
    const auto report = to_json(r);
    if (!out.empty()) {
      write_json(out, report);
      write_manifest(app, sub, sidecar(out, ".manifest"));
    }
    if (json) {
      out_s << report.dump(2) << "\n";
    } else {
      out_s << format_table(r, ds.name());
    }
    return kOk;
  }
};

struct SimulateCmd {
  double p = 0.5;
  std::size_t n = 10000;
  std::size_t choices = 4;
  std::string critic = "oracle";
  int turns = kDefaultInferenceTurns;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  std::vector<double> ks{1.0, 3.0};
  StrategyOpts strategy;

  CLI::App* attach(CLI::App& app) {
    auto* sub = app.add_subcommand("simulate", "Synthetic dataset + sim reasoner + chosen critic");
    sub->add_option("--p", p, "Per-turn probability of a correct answer")->capture_default_str();
    sub->add_option("--n", n, "Number of synthetic questions")->capture_default_str();
    sub->add_option("--choices", choices, "Choices per question")->capture_default_str();
    sub->add_option("--critic", critic, "oracle | accept | reject | linear:<model> | remote:<url>")
        ->capture_default_str();
    sub->add_option("--turns,--max-turns", turns, "Turns before abstaining")->capture_default_str();
    sub->add_option("--seed", seed, "Seed for gold answers and the sim reasoner")->capture_default_str();
    sub->add_option("--workers", workers, "Items processed concurrently")->capture_default_str();
    sub->add_option("--out", out, "Directory for dataset, outcomes and report");
    sub->add_option("--ks", ks, "Formula-score penalties")->delimiter(',')->capture_default_str();
    strategy.add_to(sub);
    return sub;
  }

  Dataset synth() const {
    if (n == 0) throw std::invalid_argument("--n must be positive");
    if (choices < 2) throw std::invalid_argument("--choices must be >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, choices - 1);
    std::vector<QaItem> items;
    items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      QaItem item;
      item.id = "sim-" + std::to_string(i);
      item.question = "Synthetic question " + std::to_string(i) + "?";
      for (std::size_t c = 0; c < choices; ++c) item.choices.push_back("option " + std::to_string(c));
      item.gold_index = pick(rng);
      items.push_back(std::move(item));
    }
    return Dataset("sim", std::move(items));
  }

  int run(const CLI::App& app, const CLI::App& sub, std::ostream& out_s) const {
    const Dataset ds = synth();
    StochasticSimReasoner reasoner(ds, p, seed);
    auto judge = make_critic(critic, &ds);
    InferenceOptions options;
    options.max_turns = turns;
    InferenceSummary summary;
    const auto outcomes = infer_all(ds, reasoner, *judge, strategy.build(), options, workers, &summary);
    const EvalResult r = score_outcomes(outcomes, ds, ks);

    if (!out.empty()) {
      const fs::path dir(out);
      fs::create_directories(dir);
      {
        std::ofstream f(dir / "dataset.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& item : ds.items()) {
          f << nlohmann::json{{"id", item.id},
                              {"question", item.question},
                              {"choices", item.choices},
                              {"answer_index", item.gold_index}}
                   .dump()
            << '\n';
        }
      }
      {
        std::ofstream f(dir / "outcomes.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& o : outcomes) f << outcome_to_json(o).dump() << '\n';
      }
      write_json(dir / "report.json", to_json(r));
      write_manifest(app, sub, dir / "run.manifest");
    }
    out_s << format_table(r, "simulated");
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(1);
    line << "answered-correct: " << r.acc << "%  (n=" << r.n << ", p=" << p << ", turns=" << turns
         << ", failed=" << summary.n_failed << ")\n";
    out_s << line.str();
    return kOk;
  }
};

}  // namespace

std::unique_ptr<Critic> make_critic(std::string_view spec, const Dataset* gold) {
  if (spec == "oracle") {
    if (gold == nullptr) throw std::invalid_argument("oracle critic needs the gold dataset");
    return std::make_unique<OracleCritic>(*gold);
  }
  if (spec == "accept" || spec == "constant:accept") return std::make_unique<AlwaysAccept>();
  if (spec == "reject" || spec == "constant:reject") return std::make_unique<AlwaysReject>();
  if (spec.starts_with("linear:")) return std::make_unique<LinearCritic>(load_model(std::string(spec.substr(7))));
  if (spec.starts_with("remote:")) {
    RemoteCriticConfig cfg;
    cfg.url = std::string(spec.substr(7));
    return std::make_unique<RemoteCritic>(std::move(cfg));
  }
  throw std::invalid_argument("unknown critic '" + std::string(spec) +
                              "' (oracle | accept | reject | linear:<path> | remote:<url>)");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distill reasoning traces, train a critic, and run critic-gated inference"};
  app.name("drr");
  app.set_config("--config", "", "key = value config file; flags override it");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  DistillCmd distill;
  PrepareCmd prepare;
  TrainCriticCmd train;
  InferCmd infer;
  EvalCmd eval;
  SimulateCmd simulate;
  auto* distill_sub = distill.attach(app);
  auto* prepare_sub = prepare.attach(app);
  auto* train_sub = train.attach(app);
  auto* infer_sub = infer.attach(app);
  auto* eval_sub = eval.attach(app);
  auto* simulate_sub = simulate.attach(app);

  std::vector<const char*> argv{"drr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*distill_sub) return distill.run(app, *distill_sub, out);
    if (*prepare_sub) return prepare.run(app, *prepare_sub, out);
    if (*train_sub) return train.run(app, *train_sub, out);
    if (*infer_sub) return infer.run(app, *infer_sub, out);
    if (*eval_sub) return eval.run(app, *eval_sub, out);
    if (*simulate_sub) return simulate.run(app, *simulate_sub, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace drr::cli
