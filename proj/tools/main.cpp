#include "ambiprice/cli.hpp"

int main(int argc, char** argv) { return ambiprice::cli::run_cli(argc, argv); }
