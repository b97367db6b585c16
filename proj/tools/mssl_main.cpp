#include <string>
#include <vector>

#include "mssl/cli.hpp"

int main(int argc, char** argv) {
  return mssl::cli::run(std::vector<std::string>(argv, argv + argc));
}
