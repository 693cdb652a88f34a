#include "amnesia/cli.hpp"

int main(int argc, char** argv) { return amnesia::cli::run(argc, argv); }
