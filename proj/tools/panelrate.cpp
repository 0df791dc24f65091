#include <iostream>

#include "panelrate/cli.hpp"

int main(int argc, char** argv) {
  return panelrate::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
