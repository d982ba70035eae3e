#include <string>
#include <vector>

#include "spanev/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spanev::run_cli(args);
}
