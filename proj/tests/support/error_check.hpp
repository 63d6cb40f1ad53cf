#pragma once

#include <doctest.h>

#include <optional>

#include "retina/error.hpp"

namespace retina::testing {

template <typename F>
std::optional<ErrorKind> error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace retina::testing

// Asserts that `expr` throws retina::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected)                                     \
  CHECK(::retina::testing::error_kind_of([&] { (void)(expr); }) ==           \
        std::optional<::retina::ErrorKind>(expected))
