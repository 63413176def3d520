#include <iostream>

#include "gdl/cli/cli.hpp"
#include "gdl/core/alloc.hpp"

int main(int argc, char** argv) {
  gdl::tune_allocator();
  return gdl::cli::run(argc, argv, std::cout, std::cerr);
}
