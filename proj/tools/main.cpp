#include "moss/cli.hpp"

int main(int argc, char** argv) { return moss::cli::run(argc, argv); }
