#include "commands.hpp"

int main(int argc, char** argv)
{
    return loadgen::cli::run(argc, argv);
}
