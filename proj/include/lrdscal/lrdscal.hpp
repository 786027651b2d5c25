#pragma once

#include "lrdscal/error.hpp"
#include "lrdscal/fft.hpp"
#include "lrdscal/gaussian_synth.hpp"
#include "lrdscal/harness.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/limit_reference.hpp"
#include "lrdscal/parallel.hpp"
#include "lrdscal/quadrature.hpp"
#include "lrdscal/rational.hpp"
#include "lrdscal/regime.hpp"
#include "lrdscal/rng.hpp"
#include "lrdscal/scalogram.hpp"
#include "lrdscal/spectral_model.hpp"
#include "lrdscal/stats.hpp"
#include "lrdscal/wavelet_bank.hpp"
