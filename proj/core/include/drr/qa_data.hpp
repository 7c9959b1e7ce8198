#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace drr {

// One multiple-choice question. `gold_index` always addresses an element of
// `choices` once the item has been accepted into a Dataset.
struct QaItem {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::size_t gold_index = 0;

  const std::string& gold_choice() const { return choices.at(gold_index); }
  bool operator==(const QaItem&) const = default;
};

// A named, validated, ordered collection of QaItems with unique ids.
class Dataset {
 public:
  // Throws EmptyDataset, DuplicateId, GoldIndexOutOfRange or MalformedLine
  // (line 0) when an item violates the schema.
  Dataset(std::string name, std::vector<QaItem> items);

  const std::string& name() const noexcept { return name_; }
  const std::vector<QaItem>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }

  // nullptr when the id is unknown.
  const QaItem* find(const std::string& id) const;
  // Throws MissingGold when the id is unknown.
  const QaItem& at(const std::string& id) const;

  bool operator==(const Dataset& other) const {
    return name_ == other.name_ && items_ == other.items_;
  }

 private:
  std::string name_;
  std::vector<QaItem> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// JSONL, one {id, question, choices, answer_index} object per line. Blank
// lines are skipped; unknown fields are ignored. Line numbers are 1-based.
Dataset parse_dataset(std::istream& in, std::string name);
Dataset load_dataset(const std::filesystem::path& path, std::string name);

}  // namespace drr
