#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace xrs {

inline constexpr int kNumClasses = 5;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "gun", "knife", "wrench", "pliers", "scissors"};

std::optional<int> class_index(std::string_view name);

/// Five prohibited-item flags; all-false is a negative image.
struct LabelVector {
  std::array<bool, kNumClasses> flags{};

  bool operator[](int i) const { return flags[static_cast<std::size_t>(i)]; }
  bool& operator[](int i) { return flags[static_cast<std::size_t>(i)]; }
  bool is_negative() const;
  /// Objectness target: any class present.
  bool any() const { return !is_negative(); }
  int count() const;
  bool operator==(const LabelVector&) const = default;
};

}  // namespace xrs
