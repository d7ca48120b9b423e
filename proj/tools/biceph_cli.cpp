#include "biceph/cli.hpp"

int main(int argc, char** argv) { return biceph::cli::run(argc, argv); }
