#pragma once

// Zero-shot self-consistency learning for seismic trace interpolation:
// a per-dataset trained convolutional autoencoder with a bidirectional
// consistency loss, plus the supporting I/O, metrics, and synthetics.

#include "zsscl/cae.hpp"
#include "zsscl/common.hpp"
#include "zsscl/gather.hpp"
#include "zsscl/masking.hpp"
#include "zsscl/metrics.hpp"
#include "zsscl/ops.hpp"
#include "zsscl/pipeline.hpp"
#include "zsscl/rng.hpp"
#include "zsscl/seismic_io.hpp"
#include "zsscl/synthgen.hpp"
#include "zsscl/tape.hpp"
#include "zsscl/tensor.hpp"
#include "zsscl/train.hpp"
