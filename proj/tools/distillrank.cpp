#include "distillrank/pipeline.hpp"

int main(int argc, char** argv) { return distillrank::cli_main(argc, argv); }
