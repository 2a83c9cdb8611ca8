#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "rfseg_doctest.hpp"
TEST_CASE("placeholder") { CHECK(true); }
