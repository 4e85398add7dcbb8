#include "levysym/experiment.hpp"

int main(int argc, char** argv) { return levysym::cli_main(argc, argv); }
