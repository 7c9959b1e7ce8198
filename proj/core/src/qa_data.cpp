#include "drr/qa_data.hpp"

#include <fstream>
#include <istream>

#include <nlohmann/json.hpp>

#include "drr/errors.hpp"

namespace drr {

namespace {

void check_item(const QaItem& item, std::size_t line) {
  if (item.id.empty()) throw MalformedLine(line, "empty id");
  if (item.choices.size() < 2) throw MalformedLine(line, "fewer than two choices for id " + item.id);
  for (const auto& c : item.choices) {
    if (c.empty()) throw MalformedLine(line, "empty choice text for id " + item.id);
  }
  if (item.gold_index >= item.choices.size()) throw GoldIndexOutOfRange(item.id);
}

QaItem item_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw MalformedLine(line, "not a JSON object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw MalformedLine(line, std::string("missing field '") + key + "'");
    return *it;
  };
  const auto& id = require("id");
  const auto& question = require("question");
  const auto& choices = require("choices");
  const auto& answer = require("answer_index");
  if (!id.is_string()) throw MalformedLine(line, "'id' must be a string");
  if (!question.is_string()) throw MalformedLine(line, "'question' must be a string");
  if (!choices.is_array()) throw MalformedLine(line, "'choices' must be an array");
  if (!answer.is_number_integer()) throw MalformedLine(line, "'answer_index' must be an integer");

  QaItem item;
  item.id = id.get<std::string>();
  item.question = question.get<std::string>();
  for (const auto& c : choices) {
    if (!c.is_string()) throw MalformedLine(line, "choices must be strings");
    item.choices.push_back(c.get<std::string>());
  }
  auto idx = answer.get<long long>();
  if (idx < 0) throw GoldIndexOutOfRange(item.id);
  item.gold_index = static_cast<std::size_t>(idx);
  return item;
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<QaItem> items)
    : name_(std::move(name)), items_(std::move(items)) {
  if (items_.empty()) throw EmptyDataset("dataset '" + name_ + "' has no items");
  by_id_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    check_item(items_[i], 0);
    if (!by_id_.emplace(items_[i].id, i).second) throw DuplicateId(items_[i].id);
  }
}

const QaItem* Dataset::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &items_[it->second];
}

const QaItem& Dataset::at(const std::string& id) const {
  const QaItem* item = find(id);
  if (item == nullptr) throw MissingGold(id);
  return *item;
}

Dataset parse_dataset(std::istream& in, std::string name) {
  std::vector<QaItem> items;
  std::unordered_map<std::string, std::size_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedLine(line, e.what());
    }
    QaItem item = item_from_json(j, line);
    check_item(item, line);
    if (!seen.emplace(item.id, line).second) throw DuplicateId(item.id);
    items.push_back(std::move(item));
  }
  return Dataset(std::move(name), std::move(items));
}

Dataset load_dataset(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  return parse_dataset(in, std::move(name));
}

}  // namespace drr
