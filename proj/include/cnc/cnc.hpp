#ifndef CNC_CNC_HPP
#define CNC_CNC_HPP

#include "cnc/affinity.hpp"
#include "cnc/checkpoint.hpp"
#include "cnc/dataset_io.hpp"
#include "cnc/errors.hpp"
#include "cnc/fixtures.hpp"
#include "cnc/loss.hpp"
#include "cnc/metrics.hpp"
#include "cnc/model.hpp"
#include "cnc/rng.hpp"
#include "cnc/trainer.hpp"
#include "cnc/types.hpp"

#endif  // CNC_CNC_HPP
