#include "hmcode/cli.hpp"

int main(int argc, char** argv) { return hmcode::cli_main(argc, argv); }
