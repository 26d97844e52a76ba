#pragma once

// Umbrella header for the whole library.

#include "vitals/ablation.hpp"
#include "vitals/config.hpp"
#include "vitals/conv3d.hpp"
#include "vitals/csv.hpp"
#include "vitals/dataset.hpp"
#include "vitals/dsp.hpp"
#include "vitals/error.hpp"
#include "vitals/hash.hpp"
#include "vitals/ingest.hpp"
#include "vitals/metrics.hpp"
#include "vitals/model.hpp"
#include "vitals/model_io.hpp"
#include "vitals/parallel.hpp"
#include "vitals/png_io.hpp"
#include "vitals/preprocess.hpp"
#include "vitals/rng.hpp"
#include "vitals/synth.hpp"
#include "vitals/tensor.hpp"
#include "vitals/train.hpp"
#include "vitals/types.hpp"
#include "vitals/version.hpp"
