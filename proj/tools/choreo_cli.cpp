#include "choreo/cli.hpp"

int main(int argc, char** argv) { return choreo::run(argc, argv); }
