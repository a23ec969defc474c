#include "fac/cli.hpp"

int main(int argc, char** argv) { return fac::cli::cli_main(argc, argv); }
