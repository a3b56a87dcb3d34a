#include "probout/cli.hpp"

int main(int argc, char** argv) { return probout::cli_main(argc, argv); }
