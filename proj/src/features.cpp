#include "tader/features.hpp"

#include <cctype>

#include "tader/error.hpp"

namespace tader {

std::string FeatureSet::name() const {
  std::string out;
  if (title) out += 'T';
  if (description) out += 'D';
  if (summary) out += 'S';
  if (cc) out += "C2";
  if (cu) out += "CU";
  return out;
}

FeatureSet FeatureSet::parse(std::string_view text) {
  std::string upper;
  upper.reserve(text.size());
  for (char c : text) {
    if (c == '+' || c == ' ') continue;
    upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  if (upper.empty()) throw ValidationError("empty feature set");

  FeatureSet fs;
  auto set_once = [&](bool& flag, std::string_view what) {
    if (flag) throw ValidationError("feature '" + std::string(what) + "' repeated in '" + std::string(text) + "'");
    flag = true;
  };
  for (std::size_t i = 0; i < upper.size();) {
    const std::string_view rest = std::string_view(upper).substr(i);
    if (rest.starts_with("C2") || rest.starts_with("CC")) {
      set_once(fs.cc, "C2");
      i += 2;
    } else if (rest.starts_with("CU")) {
      set_once(fs.cu, "CU");
      i += 2;
    } else if (rest[0] == 'T') {
      set_once(fs.title, "T");
      ++i;
    } else if (rest[0] == 'D') {
      set_once(fs.description, "D");
      ++i;
    } else if (rest[0] == 'S') {
      set_once(fs.summary, "S");
      ++i;
    } else {
      throw ValidationError("unknown feature set '" + std::string(text) + "'");
    }
  }
  return fs;
}

}  // namespace tader
