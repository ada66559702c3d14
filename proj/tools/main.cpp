#include "sfada/cli.hpp"

int main(int argc, char** argv) { return sfada::run_cli(argc, argv); }
