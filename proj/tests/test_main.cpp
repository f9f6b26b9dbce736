#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "dgstgcn/runtime.hpp"

int main(int argc, char **argv) {
  dgstgcn::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
