#include "commands.hpp"

int main(int argc, char** argv) { return metsfuse::cli::run(argc, argv); }
