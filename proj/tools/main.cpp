#include "cli.hpp"

int main(int argc, char** argv) { return ctxsearch::cli::run(argc, argv); }
