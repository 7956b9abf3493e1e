#pragma once

#include <string>
#include <string_view>

namespace tader {

/// Which issue attributes take part in a comparison.
///
/// Title, description and summary are textual; `cc` is the gap between the
/// two created dates and `cu` the gap between the query's created date and
/// the candidate's updated date.
struct FeatureSet {
  bool title = false;
  bool description = false;
  bool summary = false;
  bool cc = false;
  bool cu = false;

  bool has_text() const { return title || description || summary; }
  std::size_t scalar_count() const { return (cc ? 1U : 0U) + (cu ? 1U : 0U); }

  /// Canonical name such as "TDS", "TC2" or "DSC2CU".
  std::string name() const;

  /// Parses names like "TDS", "dt", "TSC2CU" or "TCC"; textual letters may
  /// appear in any order. Throws ValidationError on unknown input.
  static FeatureSet parse(std::string_view text);

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

}  // namespace tader
