#pragma once

// Everything in one include.

#include "scgnet/baselines.hpp"
#include "scgnet/cli.hpp"
#include "scgnet/config.hpp"
#include "scgnet/cv.hpp"
#include "scgnet/dataset.hpp"
#include "scgnet/error.hpp"
#include "scgnet/ini.hpp"
#include "scgnet/io.hpp"
#include "scgnet/manifest.hpp"
#include "scgnet/matrix.hpp"
#include "scgnet/metrics.hpp"
#include "scgnet/model.hpp"
#include "scgnet/nn/grad_check.hpp"
#include "scgnet/nn/layers.hpp"
#include "scgnet/nn/loss.hpp"
#include "scgnet/nn/tensor.hpp"
#include "scgnet/optim.hpp"
#include "scgnet/preprocess.hpp"
#include "scgnet/rng.hpp"
#include "scgnet/smote.hpp"
#include "scgnet/synthetic.hpp"
#include "scgnet/train.hpp"
#include "scgnet/tune.hpp"
