#include "biasamp/cli.hpp"

int main(int argc, char** argv) { return biasamp::cli::run_cli(argc, argv); }
