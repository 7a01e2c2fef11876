#pragma once

// Umbrella header.

#include "kinlab/bump.hpp"
#include "kinlab/errors.hpp"
#include "kinlab/experiments.hpp"
#include "kinlab/family.hpp"
#include "kinlab/family_models.hpp"
#include "kinlab/flows.hpp"
#include "kinlab/intersect.hpp"
#include "kinlab/kinematic.hpp"
#include "kinlab/linalg.hpp"
#include "kinlab/parallel.hpp"
#include "kinlab/rng.hpp"
#include "kinlab/serialize.hpp"
#include "kinlab/submanifold.hpp"
#include "kinlab/torus.hpp"
#include "kinlab/verify.hpp"
