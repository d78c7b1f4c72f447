#include "css/cli.hpp"

int main(int argc, char** argv) { return css::cli::run(argc, argv); }
