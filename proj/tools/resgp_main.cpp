#include "resgp/commands.hpp"

int main(int argc, char** argv) {
    return resgp::cli::run(argc, argv);
}
