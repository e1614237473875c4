#pragma once

// Umbrella header.

#include "shadowcert/certify.hpp"
#include "shadowcert/contour.hpp"
#include "shadowcert/geometry.hpp"
#include "shadowcert/linalg.hpp"
#include "shadowcert/online.hpp"
#include "shadowcert/oracle.hpp"
#include "shadowcert/pgdf.hpp"
#include "shadowcert/planner.hpp"
#include "shadowcert/random.hpp"
#include "shadowcert/render.hpp"
#include "shadowcert/scene.hpp"
#include "shadowcert/shadow.hpp"
#include "shadowcert/stats.hpp"
