#include "navlab/cli.hpp"

int main(int argc, char** argv) { return navlab::cli::run(argc, argv); }
