#pragma once

#include "ctxsearch/dagger.hpp"
#include "ctxsearch/error.hpp"
#include "ctxsearch/eval.hpp"
#include "ctxsearch/features.hpp"
#include "ctxsearch/gen_config.hpp"
#include "ctxsearch/geometry.hpp"
#include "ctxsearch/policy.hpp"
#include "ctxsearch/policy_io.hpp"
#include "ctxsearch/scene.hpp"
#include "ctxsearch/scene_io.hpp"
#include "ctxsearch/scene_sim.hpp"
#include "ctxsearch/search.hpp"
#include "ctxsearch/subset_select.hpp"
#include "ctxsearch/trace_io.hpp"
