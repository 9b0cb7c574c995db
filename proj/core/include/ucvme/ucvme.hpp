#pragma once

#include "ucvme/data.hpp"
#include "ucvme/errors.hpp"
#include "ucvme/evaluation.hpp"
#include "ucvme/losses.hpp"
#include "ucvme/matrix.hpp"
#include "ucvme/mlp.hpp"
#include "ucvme/optimizer.hpp"
#include "ucvme/rng.hpp"
#include "ucvme/training.hpp"
#include "ucvme/vme.hpp"
