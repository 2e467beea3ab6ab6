#include "dmcl/cli/commands.hpp"

int main(int argc, char** argv) { return dmcl::cli::run_tool(argc, argv); }
