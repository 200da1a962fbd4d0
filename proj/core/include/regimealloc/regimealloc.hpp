#pragma once

#include "regimealloc/allocators.hpp"
#include "regimealloc/dynamic.hpp"
#include "regimealloc/error.hpp"
#include "regimealloc/marketdata.hpp"
#include "regimealloc/regimes.hpp"
#include "regimealloc/spectral.hpp"
#include "regimealloc/transitions.hpp"
