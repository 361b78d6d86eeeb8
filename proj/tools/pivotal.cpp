#include <pivotal/cli.hpp>

int main(int argc, char** argv)
{
    return pivotal::parse_and_dispatch(argc, argv);
}
