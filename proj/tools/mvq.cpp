#include "mvq/cli.hpp"

int main(int argc, char** argv) { return mvq::cli::run(argc, argv); }
