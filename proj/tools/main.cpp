#include "varseg/cli.hpp"

int main(int argc, char** argv) { return varseg::cli::cli_main(argc, argv); }
