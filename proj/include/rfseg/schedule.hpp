#pragma once

#include <vector>

#include "rfseg/errors.hpp"

namespace rfseg {

// init_lr * (1 - e / max_epoch)^0.9
double poly_lr(int64_t epoch, double init_lr, int64_t max_epoch);

// Weights halve per coarser level and normalize to sum 1; index 0 is the
// full-resolution loss.
std::vector<double> deep_supervision_weights(int levels);

}  // namespace rfseg
