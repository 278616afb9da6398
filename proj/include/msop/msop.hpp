#pragma once

#include "msop/banded.hpp"
#include "msop/dynamics.hpp"
#include "msop/envelope.hpp"
#include "msop/error.hpp"
#include "msop/expr.hpp"
#include "msop/geometry.hpp"
#include "msop/interval_set.hpp"
#include "msop/laurent.hpp"
#include "msop/linalg2.hpp"
#include "msop/symbol.hpp"
#include "msop/weights.hpp"
