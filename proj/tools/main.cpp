#include "cli.hpp"

int main(int argc, char** argv) { return mmsi::cli::run(argc, argv); }
