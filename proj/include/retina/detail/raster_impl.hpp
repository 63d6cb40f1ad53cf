#pragma once

#include <string>

#include "retina/error.hpp"

namespace retina {

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!same_shape(a, b)) {
    throw Error(ErrorKind::contract,
                std::string(what) + ": shape mismatch " +
                    shape_string(a.width(), a.height()) + " vs " +
                    shape_string(b.width(), b.height()));
  }
}

}  // namespace retina
