// Copyright 2026 The msfl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace msfl {

inline constexpr std::string_view kVersion = "1.0.0";

/// Raised when a configuration or input violates one or more invariants.
/// Carries every failed check, not only the first.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> failures)
      : std::runtime_error(join(failures)), failures_(std::move(failures)) {}

  explicit ValidationError(const std::string& failure)
      : ValidationError(std::vector<std::string>{failure}) {}

  const std::vector<std::string>& failures() const noexcept { return failures_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "validation failed";
    for (const auto& item : items) {
      out += "\n  - ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> failures_;
};

/// Collects invariant failures and throws them together.
class Checker {
 public:
  Checker& require(bool ok, std::string message) {
    if (!ok) failures_.push_back(std::move(message));
    return *this;
  }
  void merge(std::vector<std::string> other) {
    for (auto& f : other) failures_.push_back(std::move(f));
  }
  bool ok() const noexcept { return failures_.empty(); }
  const std::vector<std::string>& failures() const noexcept { return failures_; }
  void throw_if_failed() const {
    if (!failures_.empty()) throw ValidationError(failures_);
  }

 private:
  std::vector<std::string> failures_;
};

using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
struct WarningSink {
  std::mutex mutex;
  WarningHandler handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
};
inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}
}  // namespace detail

/// Replace the process-wide warning handler; returns the previous one.
/// An empty handler silences warnings.
inline WarningHandler set_warning_handler(WarningHandler handler) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  std::swap(sink.handler, handler);
  return handler;
}

inline void warn(std::string_view message) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  if (sink.handler) sink.handler(message);
}

}  // namespace msfl
