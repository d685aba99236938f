#include "rekf/io.hpp"
int main() { return 0; }
