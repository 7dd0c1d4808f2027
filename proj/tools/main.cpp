#include "cli.hpp"

int main(int argc, char** argv) { return powerlearn::cli::run(argc, argv); }
