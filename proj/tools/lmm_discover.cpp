#include "lmmd/cli.hpp"

int main(int argc, char** argv) { return lmmd::cli::parse_and_dispatch(argc, argv); }
