#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "unit/helpers.hpp"

namespace drr {
namespace {

using nlohmann::json;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult drr_cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fx(const std::string& name) { return test::fixture(name).string(); }

json read_json(const std::filesystem::path& p) { return json::parse(test::slurp(p)); }

TEST(Cli, DistillScriptedFixture) {
  test::TempDir dir;
  const auto out = (dir / "traces.jsonl").string();
  auto r = drr_cli({"distill", "--dataset", fx("mini_qa.jsonl"), "--out", out, "--backend", "scripted", "--fixtures",
                    fx("mini_responses.jsonl"), "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = read_json(out + ".summary.json");
  EXPECT_EQ(summary["n_records"], 7);
  EXPECT_EQ(summary["n_accepted"], 2);
  EXPECT_EQ(summary["n_exhausted"], 1);
  EXPECT_EQ(summary["status"], "complete");
  EXPECT_TRUE(std::filesystem::exists(out + ".manifest"));

  auto again = drr_cli({"distill", "--dataset", fx("mini_qa.jsonl"), "--out", out, "--backend", "scripted",
                        "--fixtures", fx("mini_responses.jsonl")});
  ASSERT_EQ(again.code, 0);
  EXPECT_NE(again.out.find("skipped: 3"), std::string::npos) << again.out;
  EXPECT_EQ(read_json(out + ".summary.json")["n_records"], 0);
}

TEST(Cli, MissingDatasetNamesPath) {
  test::TempDir dir;
  const auto missing = (dir / "no_such.jsonl").string();
  auto r = drr_cli({"distill", "--dataset", missing, "--out", (dir / "t.jsonl").string(), "--backend", "sim"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(missing), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(drr_cli({}).code, cli::kUsage);
  EXPECT_EQ(drr_cli({"distill"}).code, cli::kUsage);
  EXPECT_EQ(drr_cli({"frobnicate"}).code, cli::kUsage);
  // The credential has no flag or config key.
  EXPECT_EQ(drr_cli({"infer", "--dataset", "x", "--out", "y", "--api-key", "k"}).code, cli::kUsage);
  EXPECT_EQ(drr_cli({"--help"}).code, cli::kOk);
}

TEST(Cli, PartialRunExitsNonZero) {
  test::TempDir dir;
  const auto out = (dir / "t.jsonl").string();
  test::spit(dir / "fx.jsonl", R"({"id":"q1","turn":1,"text":"Answer: 1\nRationale: ok"})" "\n");
  auto r = drr_cli({"distill", "--dataset", fx("mini_qa.jsonl"), "--out", out, "--backend", "scripted", "--fixtures",
                    (dir / "fx.jsonl").string()});
  EXPECT_EQ(r.code, cli::kRuntime);
  const auto summary = read_json(out + ".summary.json");
  EXPECT_EQ(summary["status"], "partial");
  EXPECT_EQ(summary["failures"].size(), 2u);
}

TEST(Cli, EvalFixtureJson) {
  test::TempDir dir;
  const auto out = (dir / "eval.json").string();
  auto r = drr_cli({"eval", "--dataset", fx("eval_qa.jsonl"), "--outcomes", fx("eval_outcomes.jsonl"), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(out);
  EXPECT_EQ(j["n"], 10);
  EXPECT_EQ(j["counts"]["correct"], 8);
  EXPECT_EQ(j["counts"]["incorrect"], 1);
  EXPECT_EQ(j["counts"]["abstain"], 1);
  EXPECT_DOUBLE_EQ(j["acc"].get<double>(), 80.0);
  EXPECT_DOUBLE_EQ(j["fs"]["1"].get<double>(), 70.0);
  EXPECT_DOUBLE_EQ(j["fs"]["3"].get<double>(), 50.0);
  EXPECT_DOUBLE_EQ(j["acc_d"].get<double>(), 90.0);
  EXPECT_NE(r.out.find("80.0"), std::string::npos);
}

TEST(Cli, SimulateNearClosedForm) {
  auto r = drr_cli({"simulate", "--p", "0.5", "--critic", "oracle", "--turns", "5", "--n", "10000", "--workers", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto at = r.out.find("answered-correct: ");
  ASSERT_NE(at, std::string::npos);
  const double pct = std::stod(r.out.substr(at + 18));
  EXPECT_NEAR(pct, 96.875, 1.5);
}

TEST(Cli, TrainCriticSeparable) {
  test::TempDir dir;
  std::vector<DmExample> train;
  std::vector<DmExample> dev;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    std::string text;
    for (int t = 0; t < 10; ++t) text += (label ? "yes" : "no") + std::to_string(rng() % 15) + " ";
    (i < 160 ? train : dev).push_back({"s" + std::to_string(i), 1, text, label});
  }
  export_training_file(train, dir / "train.jsonl");
  export_training_file(dev, dir / "dev.jsonl");
  const auto model = (dir / "critic.bin").string();
  auto r = drr_cli({"train-critic", "--train", (dir / "train.jsonl").string(), "--dev", (dir / "dev.jsonl").string(),
                    "--out", model, "--epochs", "5", "--lr", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GE(read_json(model + ".report.json")["dev_accuracy"].get<double>(), 0.95);
  EXPECT_NO_THROW(cli::make_critic("linear:" + model, nullptr));
}

TEST(Cli, EndToEndPipeline) {
  test::TempDir dir;
  const auto traces = (dir / "traces.jsonl").string();
  ASSERT_EQ(drr_cli({"distill", "--dataset", fx("mini_qa.jsonl"), "--out", traces, "--backend", "sim", "--p", "0.4"})
                .code,
            0);
  const auto prep = (dir / "prep").string();
  auto p = drr_cli({"prepare", "--traces", traces, "--dataset", fx("mini_qa.jsonl"), "--out", prep, "--train-fraction",
                    "0.67"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "prep" / "prepare_summary.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "prep" / "run.manifest"));
  const auto model = (dir / "m.bin").string();
  auto t = drr_cli({"train-critic", "--train", prep + "/train.jsonl", "--dev", prep + "/dev.jsonl", "--out", model,
                    "--hash-dim", "4096"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto outcomes = (dir / "o.jsonl").string();
  auto i = drr_cli({"infer", "--dataset", fx("mini_qa.jsonl"), "--out", outcomes, "--backend", "sim", "--critic",
                    "linear:" + model});
  ASSERT_EQ(i.code, 0) << i.err;
  auto e = drr_cli({"eval", "--dataset", fx("mini_qa.jsonl"), "--outcomes", outcomes, "--json"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(json::parse(e.out)["n"], 3);
}

TEST(Cli, ManifestReproducesOutputs) {
  test::TempDir dir;
  const auto first = (dir / "a.jsonl").string();
  ASSERT_EQ(drr_cli({"distill", "--dataset", fx("mini_qa.jsonl"), "--out", first, "--backend", "sim", "--p", "0.3",
                     "--seed", "17", "--strategy", "gradual"})
                .code,
            0);
  const auto manifest = test::slurp(first + ".manifest");
  EXPECT_NE(manifest.find("distill.seed=17"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("0.1.0"), std::string::npos);

  const auto second = (dir / "b.jsonl").string();
  auto r = drr_cli({"--config", first + ".manifest", "distill", "--out", second});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(test::slurp(first), test::slurp(second));

  // Flags beat the file.
  const auto third = (dir / "c.jsonl").string();
  ASSERT_EQ(drr_cli({"--config", first + ".manifest", "distill", "--out", third, "--seed", "18"}).code, 0);
  EXPECT_NE(test::slurp(third + ".manifest").find("distill.seed=18"), std::string::npos);
}

TEST(Cli, ConfigFileSectionSyntax) {
  test::TempDir dir;
  test::spit(dir / "run.ini", "[simulate]\nn = 40\np = 1.0\nturns = 1\n");
  auto r = drr_cli({"--config", (dir / "run.ini").string(), "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("answered-correct: 100.0%"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n=40"), std::string::npos);
}

TEST(Cli, MakeCriticSpecs) {
  const Dataset ds("d", {test::make_item("a", {"x", "y"}, 0)});
  EXPECT_NO_THROW(cli::make_critic("oracle", &ds));
  EXPECT_THROW(cli::make_critic("oracle", nullptr), std::invalid_argument);
  EXPECT_EQ(cli::make_critic("reject", nullptr)->assess("t").verdict, Verdict::Reject);
  EXPECT_EQ(cli::make_critic("constant:accept", nullptr)->assess("t").verdict, Verdict::Accept);
  EXPECT_NO_THROW(cli::make_critic("remote:http://127.0.0.1:1", nullptr));
  EXPECT_THROW(cli::make_critic("magic", nullptr), std::invalid_argument);
  EXPECT_THROW(cli::make_critic("linear:/no/such/model.bin", nullptr), IoError);
}

}  // namespace
}  // namespace drr
