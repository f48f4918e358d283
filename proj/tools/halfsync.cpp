#include "halfsync/cli/cli.hpp"

int main(int argc, char** argv) { return halfsync::cli::main(argc, argv); }
