#include "evio/parallel.hpp"

#include <cstdlib>
#include <string>

namespace evio {

int resolve_threads(int requested) {
  if (const char* env = std::getenv("EVIO_THREADS"); env != nullptr && *env != '\0') {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(requested, 1);
}

}  // namespace evio
