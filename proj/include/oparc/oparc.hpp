#pragma once

#include "oparc/types.hpp"
#include "oparc/array_model.hpp"
#include "oparc/vcm.hpp"
#include "oparc/kernel.hpp"
#include "oparc/iterative.hpp"
#include "oparc/cadmm.hpp"
#include "oparc/multipoint.hpp"
#include "oparc/synthesis.hpp"
#include "oparc/adaptive.hpp"
#include "oparc/quiescent.hpp"
#include "oparc/scenario.hpp"
#include "oparc/io.hpp"
#include "oparc/config.hpp"
