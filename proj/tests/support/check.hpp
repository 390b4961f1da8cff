#pragma once

#include <doctest.h>

#include "mutmod/error.hpp"

// Asserts that `expr` throws mutmod::Error with code `c`.
#define CHECK_CODE(expr, c)                                        \
  do {                                                             \
    try {                                                          \
      (void)(expr);                                                \
      FAIL_CHECK("expected " << mutmod::to_string(c));             \
    } catch (const mutmod::Error& e) {                             \
      CHECK_MESSAGE(e.code() == (c), e.what());                    \
    }                                                              \
  } while (0)
