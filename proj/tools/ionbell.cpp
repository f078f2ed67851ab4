#include "cli/commands.hpp"

int main(int argc, char** argv) { return ionbell::cli::run(argc, argv); }
