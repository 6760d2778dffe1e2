#include "routescan/telemetry.hpp"

#include <string>

#include "routescan/errors.hpp"

namespace routescan {

std::string_view to_string(ClassLabel label) noexcept {
  return label == ClassLabel::positive ? "positive" : "benign";
}

ClassLabel parse_class_label(std::string_view text) {
  if (text == "benign") return ClassLabel::benign;
  if (text == "positive") return ClassLabel::positive;
  throw ParseError("unknown class label '" + std::string(text) + "'");
}

}  // namespace routescan
