#include "nscd/harness.hpp"

int main(int argc, char** argv)
{
  return nscd::runCli(argc, argv);
}
