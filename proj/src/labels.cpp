#include "xrs/labels.hpp"

#include <algorithm>

namespace xrs {

std::optional<int> class_index(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (kClassNames[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

bool LabelVector::is_negative() const {
  return std::none_of(flags.begin(), flags.end(), [](bool f) { return f; });
}

int LabelVector::count() const {
  return static_cast<int>(std::count(flags.begin(), flags.end(), true));
}

}  // namespace xrs
