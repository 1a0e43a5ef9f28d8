#include "splab/cli_commands.hpp"

int main(int argc, char** argv) { return splab::run_cli(argc, argv); }
