#include "modist/cli.hpp"

int main(int argc, char** argv) { return modist::cli::run(argc, argv); }
