#include "grade/cli.hpp"

int main(int argc, char** argv) { return grade::cli::run(argc, argv); }
