// Writes the bundled toy fixture set (spaces, constraints, dictionary,
// benchmark, dataset, cluster seeds and a ready config) into a directory.

#include <cstdio>
#include <string>

#include "toy_data.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::fprintf(stderr, "usage: %s <output-dir> [seed]\n", argv[0]);
    return 2;
  }
  const std::string dir = argv[1];
  const std::uint64_t seed = argc == 3 ? std::stoull(argv[2]) : 20240501ULL;
  try {
    const auto layout = sexwes::toydata::write_toy_world(dir, seed);
    std::printf("toy data written to %s\nconfig: %s\n", layout.dir.c_str(),
                layout.config_path.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
