#pragma once

#include "rtucker/archive.hpp"
#include "rtucker/bounds.hpp"
#include "rtucker/datasets.hpp"
#include "rtucker/dense_tensor.hpp"
#include "rtucker/errors.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/operators.hpp"
#include "rtucker/randomized.hpp"
#include "rtucker/shape.hpp"
#include "rtucker/sketch.hpp"
#include "rtucker/sparse_tensor.hpp"
#include "rtucker/tensor_ops.hpp"
#include "rtucker/tns_io.hpp"
#include "rtucker/tucker.hpp"
#include "rtucker/tucker_tensor.hpp"
