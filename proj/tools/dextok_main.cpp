#include "dextok/cli.hpp"

int main(int argc, char** argv) { return dextok::cli::run(argc, argv); }
