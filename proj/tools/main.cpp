#include "marginlab/cli.hpp"

int main(int argc, char** argv) { return marginlab::run_cli(argc, argv); }
