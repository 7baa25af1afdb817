#pragma once

#include "cmlp/mlp/lbfgs.hpp"
#include "cmlp/mlp/model.hpp"
#include "cmlp/mlp/serialize.hpp"
#include "cmlp/mlp/train.hpp"
