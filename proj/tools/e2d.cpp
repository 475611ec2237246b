#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) { return e2d::app::run(argc, argv, std::cout, std::cerr); }
