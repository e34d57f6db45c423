#include "lpo/parallel.hpp"

#include <omp.h>

namespace lpo {

std::string_view to_string(Execution e) {
  return e == Execution::serial ? "serial" : "parallel";
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace lpo
