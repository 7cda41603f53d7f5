#pragma once

#include "cpbound/error.hpp"

#include <optional>

namespace testing {

/// Error code thrown by f, or nullopt when it returns normally.
template <class F>
std::optional<cpbound::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const cpbound::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing
