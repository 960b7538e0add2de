#pragma once

// Umbrella header for the ECG analysis library: signal ingestion, wavelet
// feature extraction and denoising, the attention network with its training
// harness, class-imbalance augmentation, metrics, and the symbolic clinical
// rule engine.

#include "ecgnet/cbam.hpp"
#include "ecgnet/common.hpp"
#include "ecgnet/config.hpp"
#include "ecgnet/gat.hpp"
#include "ecgnet/gradcheck.hpp"
#include "ecgnet/imbalance.hpp"
#include "ecgnet/layers.hpp"
#include "ecgnet/metrics.hpp"
#include "ecgnet/model.hpp"
#include "ecgnet/pipeline.hpp"
#include "ecgnet/record.hpp"
#include "ecgnet/svg.hpp"
#include "ecgnet/symbolic.hpp"
#include "ecgnet/synth.hpp"
#include "ecgnet/tensor.hpp"
#include "ecgnet/train.hpp"
#include "ecgnet/tst.hpp"
#include "ecgnet/wavelet.hpp"
