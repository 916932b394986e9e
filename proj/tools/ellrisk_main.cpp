#include "ellrisk/cli.hpp"

int main(int argc, char** argv) { return ellrisk::cli::run(argc, argv); }
