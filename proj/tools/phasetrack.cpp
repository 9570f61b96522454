#include "phasetrack/cli.hpp"

int main(int argc, char** argv) { return phasetrack::cli::run(argc, argv); }
