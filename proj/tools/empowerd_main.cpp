#include "empowerd/cli.hpp"

int main(int argc, char** argv) { return empowerd::run_cli(argc, argv); }
