#include "scgnet/cli.hpp"

int main(int argc, char** argv) { return scgnet::cli::dispatch(argc, argv); }
