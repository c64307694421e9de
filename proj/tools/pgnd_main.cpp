#include "pgnd/cli.hpp"

int main(int argc, char** argv) { return pgnd::cli_main(argc, argv); }
