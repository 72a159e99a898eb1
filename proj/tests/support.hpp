#pragma once

#include <filesystem>
#include <string>

#include "compreg/io.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return COMPREG_DATA_DIR; }

/// Glass table: 8 oxide parts, RI as response, type as factor.
inline compreg::Dataset load_glass() {
  return compreg::load_csv(data_dir() / "glass.csv", compreg::RoleSpec::parse("Na..Fe=composition,RI=response,type=factor"));
}

}  // namespace testing_support
