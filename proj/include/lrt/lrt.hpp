#pragma once

#include "lrt/core.hpp"
#include "lrt/geometry.hpp"
#include "lrt/inner.hpp"
#include "lrt/outer.hpp"
#include "lrt/pnm.hpp"
#include "lrt/prox.hpp"
#include "lrt/svd.hpp"
#include "lrt/synth.hpp"
