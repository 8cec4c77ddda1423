#include "pbe/harness.hpp"

int main(int argc, char** argv) { return pbe::cli_main(argc, argv); }
