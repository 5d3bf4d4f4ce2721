#include "qresnet/cli.hpp"

int main(int argc, char** argv) { return qresnet::cli::run(argc, argv); }
