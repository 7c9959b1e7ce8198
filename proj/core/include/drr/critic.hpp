#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "drr/answer.hpp"
#include "drr/qa_data.hpp"

namespace drr {

struct DmExample;

enum class Verdict { Accept, Reject };
std::string_view to_string(Verdict v);

// A critic's Accept probability and the verdict it implies at `threshold`.
struct CriticScore {
  double p_accept = 0.0;
  Verdict verdict = Verdict::Reject;
  double threshold = 0.5;

  // verdict = Accept iff p_accept >= threshold.
  static CriticScore at_threshold(double p_accept, double threshold);
  bool operator==(const CriticScore&) const = default;
};

// Harness-provided facts about the turn being judged. Only test critics read
// it; production critics see the text alone.
struct TurnSideband {
  std::string_view question_id;
  int turn = 1;
  const Answer* answer = nullptr;
};

class Critic {
 public:
  virtual ~Critic() = default;
  // Deterministic and safe to call concurrently. `input_text` must be
  // non-empty.
  virtual CriticScore assess(std::string_view input_text, const TurnSideband* sideband = nullptr) const = 0;
};

class AlwaysAccept final : public Critic {
 public:
  CriticScore assess(std::string_view input_text, const TurnSideband* sideband = nullptr) const override;
};

class AlwaysReject final : public Critic {
 public:
  CriticScore assess(std::string_view input_text, const TurnSideband* sideband = nullptr) const override;
};

// Accepts exactly the turns whose answer is the gold choice. Needs the
// sideband; throws std::logic_error without it.
class OracleCritic final : public Critic {
 public:
  explicit OracleCritic(const Dataset& gold);
  CriticScore assess(std::string_view input_text, const TurnSideband* sideband = nullptr) const override;

 private:
  std::unordered_map<std::string, std::size_t> gold_;
};

// ---------------------------------------------------------------------------
// Hashed bag-of-words logistic critic.

using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

inline constexpr std::uint32_t kDefaultHashDim = 1u << 18;
inline constexpr std::uint32_t kMinHashDim = 1u << 10;

// Lowercases, splits on runs of non-alphanumeric bytes, hashes each token
// with FNV-1a 64 modulo hash_dim, and scales counts by 1/sqrt(#tokens).
// Result is sorted by bucket with no duplicate buckets.
SparseVector featurize(std::string_view text, std::uint32_t hash_dim);

struct ClassWeights {
  double reject = 3.0;
  double accept = 1.0;

  double for_label(int label) const { return label == 1 ? accept : reject; }
  bool operator==(const ClassWeights&) const = default;
};

struct LinearCriticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::uint32_t hash_dim = kDefaultHashDim;
  double threshold = 0.5;
  ClassWeights class_weights;

  // Zero-initialised model; throws std::invalid_argument on a bad hash_dim.
  static LinearCriticModel zeros(std::uint32_t hash_dim, double threshold = 0.5, ClassWeights cw = {});
  void validate() const;
  double logit(const SparseVector& x) const;
  double p_accept(const SparseVector& x) const;
  bool operator==(const LinearCriticModel&) const = default;
};

double sigmoid(double z) noexcept;

// w_y * -log P(y | x) for P(accept) = sigmoid(z), evaluated in a form that
// stays finite for large |z|.
double weighted_logistic_loss(double logit, int label, const ClassWeights& cw) noexcept;
double example_loss(const LinearCriticModel& m, const SparseVector& x, int label);

// d loss / d logit = w_y * (p - y); the weight gradient is that times x.
struct LossGradient {
  SparseVector weights;
  double bias = 0.0;
};
LossGradient loss_gradient(const LinearCriticModel& m, const SparseVector& x, int label);

class LinearCritic final : public Critic {
 public:
  explicit LinearCritic(LinearCriticModel model);
  CriticScore assess(std::string_view input_text, const TurnSideband* sideband = nullptr) const override;
  const LinearCriticModel& model() const noexcept { return model_; }

 private:
  LinearCriticModel model_;
};

struct TrainHyper {
  double lr = 0.5;
  int epochs = 5;
  ClassWeights class_weights;
  std::uint32_t hash_dim = kDefaultHashDim;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

struct ConfusionCounts {
  std::size_t true_accept = 0;
  std::size_t true_reject = 0;
  std::size_t false_positive = 0;  // predicted Accept, label Reject
  std::size_t false_negative = 0;  // predicted Reject, label Accept

  std::size_t total() const { return true_accept + true_reject + false_positive + false_negative; }
  double accuracy() const;
};

struct TrainReport {
  int epochs_run = 0;
  double final_train_loss = 0.0;
  double dev_accuracy = 0.0;
  std::size_t dev_false_positive_count = 0;
  std::size_t dev_false_negative_count = 0;
  std::size_t dev_size = 0;
};

ConfusionCounts evaluate(const LinearCriticModel& m, std::span<const DmExample> examples, double threshold);

// Seeded SGD over shuffled epochs. Throws EmptyCorpus when `train` is empty.
std::pair<LinearCriticModel, TrainReport> train_linear(std::span<const DmExample> train,
                                                       std::span<const DmExample> dev,
                                                       const TrainHyper& hyper);
// Same, reading the training-file JSONL format.
std::pair<LinearCriticModel, TrainReport> train_linear(const std::filesystem::path& train_file,
                                                       const std::filesystem::path& dev_file,
                                                       const TrainHyper& hyper);

void save_model(const LinearCriticModel& model, const std::filesystem::path& path);
LinearCriticModel load_model(const std::filesystem::path& path);

}  // namespace drr
