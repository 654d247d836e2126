#include "artgan/cli.hpp"

int main(int argc, char** argv) { return artgan::cli::run(argc, argv); }
