#include "nqs/cli.hpp"

int main(int argc, char** argv) { return nqs::cli_main(argc, argv); }
