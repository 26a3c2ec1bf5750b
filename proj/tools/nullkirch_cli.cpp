#include "nullkirch/cli.hpp"

int main(int argc, char** argv) { return nullkirch::cli_main(argc, argv); }
