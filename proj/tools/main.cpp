#include "scenemotion/cli.hpp"

int main(int argc, char** argv) { return scenemotion::run_cli(argc, argv); }
