#include "drr/critic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "drr/errors.hpp"
#include "drr/reasoner.hpp"
#include "drr/trainprep.hpp"

namespace drr {

std::string_view to_string(Verdict v) { return v == Verdict::Accept ? "accept" : "reject"; }

CriticScore CriticScore::at_threshold(double p_accept, double threshold) {
  return CriticScore{p_accept, p_accept >= threshold ? Verdict::Accept : Verdict::Reject, threshold};
}

CriticScore AlwaysAccept::assess(std::string_view, const TurnSideband*) const {
  return CriticScore::at_threshold(1.0, 0.5);
}

CriticScore AlwaysReject::assess(std::string_view, const TurnSideband*) const {
  return CriticScore::at_threshold(0.0, 0.5);
}

OracleCritic::OracleCritic(const Dataset& gold) {
  gold_.reserve(gold.size());
  for (const auto& item : gold.items()) gold_.emplace(item.id, item.gold_index);
}

CriticScore OracleCritic::assess(std::string_view, const TurnSideband* sideband) const {
  if (sideband == nullptr || sideband->answer == nullptr) {
    throw std::logic_error("OracleCritic needs the turn sideband");
  }
  auto it = gold_.find(std::string(sideband->question_id));
  if (it == gold_.end()) throw MissingGold(std::string(sideband->question_id));
  return CriticScore::at_threshold(is_choice(*sideband->answer, it->second) ? 1.0 : 0.0, 0.5);
}

// ---------------------------------------------------------------------------

namespace {

bool is_pow2(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Bytes >= 0x80 are kept inside tokens so UTF-8 words are not shredded.
bool is_token_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

SparseVector featurize(std::string_view text, std::uint32_t hash_dim) {
  if (!is_pow2(hash_dim)) throw std::invalid_argument("hash_dim must be a power of two");
  std::map<std::uint32_t, double> counts;
  std::size_t n_tokens = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const auto bucket = static_cast<std::uint32_t>(fnv1a64(token) & (hash_dim - 1));
    counts[bucket] += 1.0;
    ++n_tokens;
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      token += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else {
      flush();
    }
  }
  flush();

  SparseVector out;
  out.reserve(counts.size());
  if (n_tokens == 0) return out;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_tokens));
  for (const auto& [bucket, count] : counts) out.emplace_back(bucket, count * scale);
  return out;
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

double weighted_logistic_loss(double logit, int label, const ClassWeights& cw) noexcept {
  // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z).
  return cw.for_label(label) * (label == 1 ? softplus(-logit) : softplus(logit));
}

LinearCriticModel LinearCriticModel::zeros(std::uint32_t hash_dim, double threshold, ClassWeights cw) {
  LinearCriticModel m;
  m.hash_dim = hash_dim;
  m.threshold = threshold;
  m.class_weights = cw;
  m.weights.assign(hash_dim, 0.0);
  m.validate();
  return m;
}

void LinearCriticModel::validate() const {
  if (!is_pow2(hash_dim) || hash_dim < kMinHashDim) {
    throw std::invalid_argument("hash_dim must be a power of two >= 1024");
  }
  if (weights.size() != hash_dim) throw std::invalid_argument("weight vector size != hash_dim");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must be in (0, 1)");
  if (!(class_weights.reject > 0.0 && class_weights.accept > 0.0)) {
    throw std::invalid_argument("class weights must be positive");
  }
}

double LinearCriticModel::logit(const SparseVector& x) const {
  double z = bias;
  for (const auto& [j, v] : x) z += weights[j] * v;
  return z;
}

double LinearCriticModel::p_accept(const SparseVector& x) const { return sigmoid(logit(x)); }

double example_loss(const LinearCriticModel& m, const SparseVector& x, int label) {
  return weighted_logistic_loss(m.logit(x), label, m.class_weights);
}

LossGradient loss_gradient(const LinearCriticModel& m, const SparseVector& x, int label) {
  const double g = m.class_weights.for_label(label) * (m.p_accept(x) - (label == 1 ? 1.0 : 0.0));
  LossGradient out;
  out.bias = g;
  out.weights.reserve(x.size());
  for (const auto& [j, v] : x) out.weights.emplace_back(j, g * v);
  return out;
}

LinearCritic::LinearCritic(LinearCriticModel model) : model_(std::move(model)) { model_.validate(); }

CriticScore LinearCritic::assess(std::string_view input_text, const TurnSideband*) const {
  return CriticScore::at_threshold(model_.p_accept(featurize(input_text, model_.hash_dim)), model_.threshold);
}

// ---------------------------------------------------------------------------
// Training

double ConfusionCounts::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(true_accept + true_reject) / static_cast<double>(n);
}

namespace {

struct Featurized {
  SparseVector x;
  int label;
};

std::vector<Featurized> featurize_all(std::span<const DmExample> examples, std::uint32_t hash_dim) {
  std::vector<Featurized> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({featurize(e.input_text, hash_dim), e.label});
  return out;
}

ConfusionCounts confusion(const LinearCriticModel& m, std::span<const Featurized> data, double threshold) {
  ConfusionCounts c;
  for (const auto& d : data) {
    const bool accept = m.p_accept(d.x) >= threshold;
    if (d.label == 1) {
      ++(accept ? c.true_accept : c.false_negative);
    } else {
      ++(accept ? c.false_positive : c.true_reject);
    }
  }
  return c;
}

}  // namespace

ConfusionCounts evaluate(const LinearCriticModel& m, std::span<const DmExample> examples, double threshold) {
  const auto data = featurize_all(examples, m.hash_dim);
  return confusion(m, data, threshold);
}

std::pair<LinearCriticModel, TrainReport> train_linear(std::span<const DmExample> train,
                                                       std::span<const DmExample> dev,
                                                       const TrainHyper& hyper) {
  if (train.empty()) throw EmptyCorpus("training corpus is empty");
  if (!(hyper.lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (hyper.epochs < 1) throw std::invalid_argument("epochs must be positive");

  LinearCriticModel model = LinearCriticModel::zeros(hyper.hash_dim, hyper.threshold, hyper.class_weights);
  const auto train_x = featurize_all(train, hyper.hash_dim);
  const auto dev_x = featurize_all(dev, hyper.hash_dim);

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(hyper.seed);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const auto& ex = train_x[i];
      const double g = model.class_weights.for_label(ex.label) * (model.p_accept(ex.x) - ex.label);
      for (const auto& [j, v] : ex.x) model.weights[j] -= hyper.lr * g * v;
      model.bias -= hyper.lr * g;
    }
  }

  TrainReport report;
  report.epochs_run = hyper.epochs;
  double total = 0.0;
  for (const auto& ex : train_x) total += example_loss(model, ex.x, ex.label);
  report.final_train_loss = total / static_cast<double>(train_x.size());
  const auto c = confusion(model, dev_x, hyper.threshold);
  report.dev_accuracy = c.accuracy();
  report.dev_false_positive_count = c.false_positive;
  report.dev_false_negative_count = c.false_negative;
  report.dev_size = c.total();
  return {std::move(model), report};
}

std::pair<LinearCriticModel, TrainReport> train_linear(const std::filesystem::path& train_file,
                                                       const std::filesystem::path& dev_file,
                                                       const TrainHyper& hyper) {
  const auto train = read_training_file(train_file);
  const auto dev = read_training_file(dev_file);
  return train_linear(train, dev, hyper);
}

// ---------------------------------------------------------------------------
// Model file: "DRRLINCR" | u32 version | u32 hash_dim | f64 threshold |
// f64 w_reject | f64 w_accept | f64 bias | f64 weights[hash_dim].
// Little-endian IEEE-754 throughout.

namespace {

constexpr char kMagic[8] = {'D', 'R', 'R', 'L', 'I', 'N', 'C', 'R'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated model file: " + path.string());
  return v;
}

}  // namespace

void save_model(const LinearCriticModel& model, const std::filesystem::path& path) {
  model.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, model.hash_dim);
    put(out, model.threshold);
    put(out, model.class_weights.reject);
    put(out, model.class_weights.accept);
    put(out, model.bias);
    out.write(reinterpret_cast<const char*>(model.weights.data()),
              static_cast<std::streamsize>(model.weights.size() * sizeof(double)));
    out.flush();
    if (!out) throw IoError("write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

LinearCriticModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path.string());
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw VersionMismatch("not a linear critic model file: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw VersionMismatch("model file version " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));
  }
  LinearCriticModel m;
  m.hash_dim = get<std::uint32_t>(in, path);
  if (!is_pow2(m.hash_dim) || m.hash_dim < kMinHashDim) {
    throw FileFormatError("bad hash_dim in model file: " + std::to_string(m.hash_dim));
  }
  m.threshold = get<double>(in, path);
  m.class_weights.reject = get<double>(in, path);
  m.class_weights.accept = get<double>(in, path);
  m.bias = get<double>(in, path);
  m.weights.resize(m.hash_dim);
  in.read(reinterpret_cast<char*>(m.weights.data()), static_cast<std::streamsize>(m.weights.size() * sizeof(double)));
  if (!in) throw IoError("truncated model file: " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in model file: " + path.string());
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FileFormatError(std::string("invalid model file: ") + e.what());
  }
  return m;
}

}  // namespace drr
