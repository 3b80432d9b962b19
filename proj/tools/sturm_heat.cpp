#include "sturm_heat/cli.hpp"

int main(int argc, char** argv) { return sturm_heat::run_cli(argc, argv); }
