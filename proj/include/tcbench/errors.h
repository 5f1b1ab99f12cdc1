#ifndef TCBENCH_ERRORS_H_
#define TCBENCH_ERRORS_H_

#include <stdexcept>
#include <string>

namespace tcbench {

// Malformed or inconsistent stored data (as opposed to a bad argument, which
// is reported with std::invalid_argument).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tcbench

#endif  // TCBENCH_ERRORS_H_
