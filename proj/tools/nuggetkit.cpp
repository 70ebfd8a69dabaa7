#include "nuggetkit/cli.hpp"

int main(int argc, char** argv) { return nuggetkit::run_cli(argc, argv); }
