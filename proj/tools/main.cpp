#include "floodgsa/cli.hpp"

int main(int argc, char** argv) { return floodgsa::cli::dispatch(argc, argv); }
