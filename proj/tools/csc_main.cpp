#include <iostream>

#include "csc/cli.hpp"

int main(int argc, char ** argv)
{
  return csc::run_cli(argc, argv, std::cout, std::cerr);
}
