#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "drr/drr.hpp"

namespace drr::test {

namespace fs = std::filesystem;

inline QaItem make_item(std::string id, std::vector<std::string> choices, std::size_t gold,
                        std::string question = "Which one?") {
  return QaItem{std::move(id), std::move(question), std::move(choices), gold};
}

inline fs::path fixture(const std::string& name) { return fs::path(DRR_FIXTURE_DIR) / name; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("drr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Forwards to another backend and keeps a copy of every request.
class RecordingReasoner final : public Reasoner {
 public:
  struct Entry {
    std::string question_id;
    int turn;
    GenerationParams params;
    std::vector<ChatMessage> messages;
  };

  explicit RecordingReasoner(Reasoner& inner) : inner_(inner) {}

  std::string generate(const GenerationRequest& r) override {
    {
      std::lock_guard lock(mu_);
      log_.push_back({std::string(r.question_id), r.turn, r.params, {r.messages.begin(), r.messages.end()}});
    }
    return inner_.generate(r);
  }

  std::vector<Entry> log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

 private:
  Reasoner& inner_;
  mutable std::mutex mu_;
  std::vector<Entry> log_;
};

// Records the critic input text for each call and delegates the verdict.
class RecordingCritic final : public Critic {
 public:
  explicit RecordingCritic(const Critic& inner) : inner_(inner) {}
  CriticScore assess(std::string_view text, const TurnSideband* sideband = nullptr) const override {
    {
      std::lock_guard lock(mu_);
      inputs_.emplace_back(text);
    }
    return inner_.assess(text, sideband);
  }
  std::vector<std::string> inputs() const {
    std::lock_guard lock(mu_);
    return inputs_;
  }

 private:
  const Critic& inner_;
  mutable std::mutex mu_;
  mutable std::vector<std::string> inputs_;
};

}  // namespace drr::test
