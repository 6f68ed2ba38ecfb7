#include <string>
#include <vector>

#include "cocreate/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cocreate::run_command(args);
}
