#pragma once

#include "gdist/caar.hpp"
#include "gdist/cluster.hpp"
#include "gdist/condense.hpp"
#include "gdist/config.hpp"
#include "gdist/core.hpp"
#include "gdist/eval.hpp"
#include "gdist/fid.hpp"
#include "gdist/graph.hpp"
#include "gdist/io.hpp"
#include "gdist/model.hpp"
#include "gdist/pipeline.hpp"
#include "gdist/propagate.hpp"
#include "gdist/sbm.hpp"
