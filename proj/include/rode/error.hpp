#pragma once

#include <stdexcept>
#include <string>

namespace rode {

// All library failures are reported through this exception type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rode
