#include "protosynth/cli.hpp"

int main(int argc, char** argv) { return protosynth::cli::run(argc, argv); }
