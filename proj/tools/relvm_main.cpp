#include "relvm/cli.hpp"

int main(int argc, char** argv) { return relvm::cli::run(argc, argv); }
