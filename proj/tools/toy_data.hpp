// Generates the bundled toy bilingual world: two rotated embedding spaces
// with planted synonym families, antonym family pairs and six domain
// clusters, plus constraint files, a seed dictionary, a similarity
// benchmark, a labeled dataset, cluster seeds and a ready-to-run config.

#pragma once

#include <cstdint>
#include <string>

namespace sexwes::toydata {

struct ToyLayout {
  std::string dir;                 // destination directory
  std::string config_path;         // <dir>/config.ini
  std::string run_dir;             // output_dir the config points at
};

// Writes every fixture file; deterministic for a given seed.
ToyLayout write_toy_world(const std::string& dir, std::uint64_t seed = 20240501);

}  // namespace sexwes::toydata
