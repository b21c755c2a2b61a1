#include "gqsgd/cli.hpp"

int main(int argc, char** argv) { return gqsgd::cli_main(argc, argv); }
