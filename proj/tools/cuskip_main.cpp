#include "cuskip/cli.hpp"

int main(int argc, char** argv) {
  return cuskip::cli::run(argc, argv);
}
