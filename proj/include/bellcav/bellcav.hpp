#pragma once

#include "bellcav/behavior.hpp"
#include "bellcav/causality.hpp"
#include "bellcav/cavendish.hpp"
#include "bellcav/lhv.hpp"
#include "bellcav/linalg.hpp"
#include "bellcav/orchestrator.hpp"
#include "bellcav/polytope.hpp"
#include "bellcav/quantum.hpp"
#include "bellcav/rng.hpp"
#include "bellcav/stats.hpp"
