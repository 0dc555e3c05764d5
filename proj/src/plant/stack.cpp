#include "hydroflex/plant/stack.hpp"

#include <cctype>

#include "hydroflex/errors.hpp"

namespace hydroflex::plant {

TechnologyStack parse_stack(const std::string& label) {
  TechnologyStack s;
  s.label = label;
  auto has = [&](const char* token) { return label.find(token) != std::string::npos; };
  if (has("VS (DFIM)") || has("DFIM")) {
    s.technology = unit::Technology::Dfim;
  } else if (has("VS (FSFC)") || has("FSFC")) {
    s.technology = unit::Technology::Fsfc;
  } else if (label.rfind("FS", 0) == 0) {
    s.technology = unit::Technology::Fixed;
  } else {
    throw ConfigError("cannot parse technology stack '" + label + "'");
  }
  s.spps = has("SPPS") || has("SPSS");
  s.hsc = has("HSC");
  s.hbh = has("HBH");
  return s;
}

std::string stack_slug(const std::string& label) {
  std::string out;
  bool sep = false;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (sep && !out.empty()) out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      sep = false;
    } else {
      sep = true;
    }
  }
  return out;
}

}  // namespace hydroflex::plant
