#pragma once

#include <doctest.h>

#include "slide/error.hpp"

namespace slide::test {

template <class F>
void check_error(ErrorCode expected, F&& f) {
  try {
    f();
    FAIL("expected " << to_string(expected));
  } catch (const SlideError& e) {
    CHECK(e.code() == expected);
  }
}

}  // namespace slide::test
