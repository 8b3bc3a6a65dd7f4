#include <string>
#include <vector>

#include "plaba/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return plaba::cli::cli_dispatch(args);
}
