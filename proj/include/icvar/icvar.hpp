#pragma once

#include "icvar/bellman.hpp"
#include "icvar/errors.hpp"
#include "icvar/export.hpp"
#include "icvar/generative.hpp"
#include "icvar/harness.hpp"
#include "icvar/instances.hpp"
#include "icvar/io.hpp"
#include "icvar/keyed_random.hpp"
#include "icvar/mdp.hpp"
#include "icvar/risk.hpp"
#include "icvar/solver.hpp"
