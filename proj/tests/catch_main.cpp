// Compiles the amalgamated Catch2 implementation (including its default main)
// exactly once; linked into every test binary.
#include <catch2/catch_amalgamated.cpp>
