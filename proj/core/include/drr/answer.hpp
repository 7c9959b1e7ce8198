#pragma once

#include <cstddef>
#include <string>
#include <variant>

namespace drr {

struct ChoiceIndex {
  std::size_t value = 0;
  bool operator==(const ChoiceIndex&) const = default;
};

// The reasoner explicitly declined every choice.
struct NoneOfTheAbove {
  bool operator==(const NoneOfTheAbove&) const = default;
};

// The response could not be parsed; `raw` keeps the model text verbatim.
struct Unparseable {
  std::string raw;
  bool operator==(const Unparseable&) const = default;
};

// What a successful parse can yield.
using ParsedAnswer = std::variant<ChoiceIndex, NoneOfTheAbove>;
// What a turn can carry once parse failures are recorded instead of thrown.
using Answer = std::variant<ChoiceIndex, NoneOfTheAbove, Unparseable>;

inline Answer widen(const ParsedAnswer& a) {
  return std::visit([](const auto& v) -> Answer { return v; }, a);
}

inline bool is_choice(const Answer& a, std::size_t index) {
  const auto* c = std::get_if<ChoiceIndex>(&a);
  return c != nullptr && c->value == index;
}

inline bool is_none_of_the_above(const Answer& a) {
  return std::holds_alternative<NoneOfTheAbove>(a);
}

// Text used when an answer is echoed back into a prompt or critic input:
// the decimal index, "none of the above", or "unparseable".
std::string answer_text(const Answer& a);

}  // namespace drr
