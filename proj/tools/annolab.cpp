#include <annolab/cli.hpp>

int main(int argc, char** argv) { return annolab::cli::run(argc, argv); }
