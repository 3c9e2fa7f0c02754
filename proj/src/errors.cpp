#include "rswitch/errors.hpp"

#include <sstream>

namespace rswitch {

namespace {

std::string blowup_message(double t, const std::vector<double>& x, int regime) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite state after step at t = " << t << ", regime " << regime << ", x = (";
  for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

}  // namespace

NumericalBlowup::NumericalBlowup(double t, std::vector<double> x, int regime)
    : Error(blowup_message(t, x, regime)), t_(t), x_(std::move(x)), regime_(regime) {}

}  // namespace rswitch
