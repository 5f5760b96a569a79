#include "rcq/cli.hpp"

int main(int argc, char** argv) { return rcq::run_cli(argc, argv); }
