#include "cdpr/errors.hpp"

#include <sstream>

namespace cdpr {

namespace {
std::string infeasible_message(double lo, double hi) {
  std::ostringstream os;
  os << "infeasible wrench: empty tension interval [" << lo << ", " << hi
     << "]";
  return os.str();
}
}  // namespace

InfeasibleWrenchError::InfeasibleWrenchError(double lambda_lo,
                                             double lambda_hi)
    : Error(infeasible_message(lambda_lo, lambda_hi)),
      lo_(lambda_lo),
      hi_(lambda_hi) {}

}  // namespace cdpr
