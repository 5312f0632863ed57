#include <string>
#include <vector>

#include "opgd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return opgd::cli::run(args);
}
