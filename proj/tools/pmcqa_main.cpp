#include "pmcqa/cli.hpp"

int main(int argc, char** argv) {
  return pmcqa::cli_run(std::vector<std::string>(argv + 1, argv + argc));
}
