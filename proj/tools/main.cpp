#include "commands.hpp"

int main(int argc, char** argv) { return conalign::cli::run(argc, argv); }
