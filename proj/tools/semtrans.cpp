#include "semtrans/cli.hpp"

int main(int argc, char** argv) { return semtrans::cli::run(argc, argv); }
