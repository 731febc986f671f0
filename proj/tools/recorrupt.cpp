#include "recorrupt/cli.hpp"

int main(int argc, char** argv) { return recorrupt::run_cli(argc, argv); }
