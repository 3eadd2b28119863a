#include "persreg/cli.hpp"

int main(int argc, char** argv) { return persreg::cli::main_entry(argc, argv); }
