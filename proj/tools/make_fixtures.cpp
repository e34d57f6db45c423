// Regenerates the shipped data sets under <root>/data and <root>/tests/data.

#include <iostream>

#include "fixture_writer.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path root = argc > 1 ? argv[1] : ".";
  try {
    for (const auto& rel : lpo::cli::write_fixtures(root)) {
      std::cout << "wrote " << (root / rel).string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
