#pragma once

#include "otlab/jko/energy.hpp"
#include "otlab/jko/pde.hpp"
#include "otlab/jko/report.hpp"
#include "otlab/jko/scheme.hpp"
