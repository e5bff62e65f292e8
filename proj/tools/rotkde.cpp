#include "rotkde/cli.hpp"

int main(int argc, char **argv) { return rotkde::cli::run(argc, argv); }
