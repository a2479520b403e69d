#include "nesp/cli.hpp"

int main(int argc, char** argv) { return nesp::cli::run(argc, argv); }
