#pragma once

#include "otlab/fivegrad/batch.hpp"
#include "otlab/fivegrad/diagnostics.hpp"
#include "otlab/fivegrad/inequality.hpp"
#include "otlab/fivegrad/mollification.hpp"
