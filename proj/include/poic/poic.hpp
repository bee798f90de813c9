#pragma once

#include "poic/config.hpp"
#include "poic/detector.hpp"
#include "poic/empty_rect.hpp"
#include "poic/extraction.hpp"
#include "poic/geometry.hpp"
#include "poic/image.hpp"
#include "poic/objective.hpp"
#include "poic/optimizer.hpp"
#include "poic/oracle.hpp"
#include "poic/pipeline.hpp"
#include "poic/plan_io.hpp"
#include "poic/scaling.hpp"
