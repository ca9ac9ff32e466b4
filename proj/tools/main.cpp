#include "splitbargain/cli.hpp"

int main(int argc, char** argv) { return splitbargain::cli::dispatch(argc, argv); }
