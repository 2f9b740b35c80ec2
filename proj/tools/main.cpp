#include "cli.hpp"
int main(int argc, char** argv) { return cpo::cli::run_cli(argc, argv); }
