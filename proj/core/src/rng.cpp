#include "mwdlp/rng.h"

#include <cmath>

namespace mwdlp {

double CounterRng::box_muller(double u1, double u2) {
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace mwdlp
