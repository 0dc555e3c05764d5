#pragma once

#include <string>

#include "hydroflex/unit/unit.hpp"

namespace hydroflex::plant {

/// Technology combination evaluated for one matrix row.
struct TechnologyStack {
  std::string label;  // as written in the matrix, e.g. "VS (DFIM) & SPSS & HSC"
  unit::Technology technology = unit::Technology::Fixed;
  bool spps = false;
  bool hsc = false;
  bool hbh = false;

  bool variable_speed() const { return unit::variable_speed(technology); }
};

/// Parses a row label. Recognises FS, VS (DFIM), VS (FSFC), SPPS/SPSS, HSC, HBH.
TechnologyStack parse_stack(const std::string& label);

/// File-name friendly form of a label.
std::string stack_slug(const std::string& label);

}  // namespace hydroflex::plant
