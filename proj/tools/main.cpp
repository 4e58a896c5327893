#include "hypergpa/cli.hpp"

int main(int argc, char** argv) { return hypergpa::run(argc, argv); }
