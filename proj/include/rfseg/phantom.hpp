#pragma once

#include <array>
#include <vector>

#include "rfseg/types.hpp"

namespace rfseg {

struct PhantomOptions {
  int64_t num_classes = 4;  // capped at 8 for the default shape budget
  std::array<int64_t, 3> shape{32, 64, 64};
  int64_t modalities = 1;
  double absent_class_prob = 0.15;  // a class may sit this volume out
  double noise_sigma = 0.02;
  int max_tries = 400;
};

struct PhantomShape {
  int64_t class_id = 0;
  bool ellipsoid = true;  // otherwise an axis-aligned block
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> radii{0, 0, 0};
};

struct Phantom {
  Volume volume;
  LabelVolume labels;
  std::vector<PhantomShape> shapes;  // one per present class
};

// Deterministic synthetic volume: non-overlapping bright shapes with
// per-class intensity bands over a dark noisy background. Every present
// class spans at least three frames; classes may be absent entirely so the
// no-object paths get exercised. Throws if the shapes cannot be packed.
Phantom synth_phantom(uint64_t seed, const PhantomOptions& options = {});

}  // namespace rfseg
