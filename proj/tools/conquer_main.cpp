#include "conquer/cli.hpp"

int main(int argc, char** argv)
{
  return conquer::cli::run(argc, argv);
}
