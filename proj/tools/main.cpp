#include "cli.hpp"

int main(int argc, char** argv) { return yieldnet::cli::run(argc, argv); }
