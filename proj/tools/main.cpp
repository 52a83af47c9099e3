#include "gazerep/cli.hpp"

int main(int argc, char** argv) { return gazerep::cli_main(argc, argv); }
