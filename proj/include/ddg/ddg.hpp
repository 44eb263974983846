#pragma once

#include "ddg/adam.hpp"
#include "ddg/autograd.hpp"
#include "ddg/checkpoint.hpp"
#include "ddg/dataio.hpp"
#include "ddg/errors.hpp"
#include "ddg/evalsuite.hpp"
#include "ddg/finite_diff.hpp"
#include "ddg/manipulate.hpp"
#include "ddg/models.hpp"
#include "ddg/rng.hpp"
#include "ddg/runconfig.hpp"
#include "ddg/tensor.hpp"
#include "ddg/trainer.hpp"
