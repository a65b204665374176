#pragma once

#include <memory>
#include <string>

#include "horolab/group.hpp"
#include "horolab/horofunction.hpp"

namespace testing {

inline horolab::GroupPtr free_group(int rank) {
  return std::make_shared<const horolab::GroupSpec>(horolab::GroupSpec::free_group(rank));
}

inline horolab::GroupPtr z2z3() {
  return std::make_shared<const horolab::GroupSpec>(
      horolab::GroupSpec::free_product_of_cyclics({2, 3}));
}

/// `unit` repeated to at least `len` letters.
inline horolab::RayPrefix periodic_ray(const horolab::GroupSpec& spec, const std::string& unit,
                                       int len) {
  horolab::Word w;
  const horolab::Word u = spec.parse(unit);
  while (static_cast<int>(w.size()) < len) w += u;
  return horolab::RayPrefix(spec, w);
}

inline horolab::RayPrefix ray_with_prefix(const horolab::GroupSpec& spec,
                                          const std::string& prefix, const std::string& tail,
                                          int len) {
  horolab::Word w = spec.parse(prefix);
  const horolab::Word u = spec.parse(tail);
  while (static_cast<int>(w.size()) < len) w += u;
  return horolab::RayPrefix(spec, w);
}

}  // namespace testing
