#include "degenctrl/cli.hpp"

int main(int argc, char** argv) { return degenctrl::cli::main_entry(argc, argv); }
