#include <catch2/catch_amalgamated.hpp>
#include "fedmua/fedmua.hpp"
