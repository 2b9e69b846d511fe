#include "fedmua/fedmua.hpp"
int main() { return 0; }
