#include "clickseg/cli.hpp"

int main(int argc, char** argv) {
    return clickseg::dispatch(argc, argv);
}
