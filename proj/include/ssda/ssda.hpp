#pragma once

#include "ssda/bench.hpp"
#include "ssda/estimators.hpp"
#include "ssda/finetune.hpp"
#include "ssda/io.hpp"
#include "ssda/masft.hpp"
#include "ssda/rng.hpp"
#include "ssda/scm.hpp"
#include "ssda/subspace.hpp"
#include "ssda/types.hpp"
