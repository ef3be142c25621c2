#include <vector>

#include "otbridge/driver.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return otbridge::run_command(args);
}
