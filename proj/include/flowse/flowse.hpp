#pragma once

#include "flowse/audio.hpp"
#include "flowse/checkpoint.hpp"
#include "flowse/config.hpp"
#include "flowse/io.hpp"
#include "flowse/linalg.hpp"
#include "flowse/model.hpp"
#include "flowse/oracle.hpp"
#include "flowse/paths.hpp"
#include "flowse/rng.hpp"
#include "flowse/sampler.hpp"
