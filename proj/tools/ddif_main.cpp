#include "ddif/cli.hpp"

int main(int argc, char** argv) { return ddif::cli_main(argc, argv); }
