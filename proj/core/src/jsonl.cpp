#include "drr/jsonl.hpp"

#include <system_error>

#include <nlohmann/json.hpp>

#include "drr/errors.hpp"
#include "text_util.hpp"

namespace drr {

namespace fs = std::filesystem;

std::size_t repair_torn_tail(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return 0;
  const auto size = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  if (size == 0) return 0;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  // Scan backwards in chunks for the last newline.
  constexpr std::uintmax_t kChunk = 4096;
  std::uintmax_t end = size;
  std::string buf;
  while (end > 0) {
    const std::uintmax_t start = end > kChunk ? end - kChunk : 0;
    buf.resize(static_cast<std::size_t>(end - start));
    in.seekg(static_cast<std::streamoff>(start));
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError("cannot read " + path.string());
    const auto pos = buf.rfind('\n');
    if (pos != std::string::npos) {
      const std::uintmax_t keep = start + pos + 1;
      if (keep == size) return 0;
      in.close();
      fs::resize_file(path, keep, ec);
      if (ec) throw IoError("cannot truncate " + path.string() + ": " + ec.message());
      return static_cast<std::size_t>(size - keep);
    }
    end = start;
  }
  in.close();
  fs::resize_file(path, 0, ec);
  if (ec) throw IoError("cannot truncate " + path.string() + ": " + ec.message());
  return static_cast<std::size_t>(size);
}

JsonlAppender::JsonlAppender(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path_.parent_path().string() + ": " + ec.message());
  }
  repair_torn_tail(path_);
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open " + path_.string() + " for append");
}

void JsonlAppender::append(std::string_view block) {
  out_.write(block.data(), static_cast<std::streamsize>(block.size()));
  out_.flush();
  if (!out_) throw IoError("write failed on " + path_.string());
}

void for_each_jsonl(const fs::path& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::trim(text).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw FileFormatError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
    try {
      fn(j, line);
    } catch (const nlohmann::json::exception& e) {
      throw FileFormatError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  }
}

}  // namespace drr
