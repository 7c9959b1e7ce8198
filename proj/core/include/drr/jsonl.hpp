#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace drr {

// Append-only JSONL sink. Opening it drops a torn final line left by an
// interrupted writer; each append() is one complete block followed by a
// flush, so a crash loses at most the block in flight.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::filesystem::path path);

  // `block` is one or more newline-terminated lines.
  void append(std::string_view block);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Truncates a file to its last '\n'. Returns the number of bytes dropped.
std::size_t repair_torn_tail(const std::filesystem::path& path);

// Calls fn(json, line_number) for every non-blank line. A missing file is
// treated as empty. Parse errors throw FileFormatError naming path:line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn);

}  // namespace drr
