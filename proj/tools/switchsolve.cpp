#include "switchsolve/cli.hpp"

int main(int argc, char** argv) { return switchsolve::cli::run(argc, argv); }
