#include "twbreather/cli.hpp"

int main(int argc, char** argv) { return twb::cli_main(argc, argv); }
