#pragma once

#include "faceaudit/error.hpp"
#include "faceaudit/util.hpp"
#include "faceaudit/csv.hpp"
#include "faceaudit/corpus.hpp"
#include "faceaudit/distributions.hpp"
#include "faceaudit/stats.hpp"
#include "faceaudit/association.hpp"
#include "faceaudit/structure.hpp"
#include "faceaudit/subspace.hpp"
#include "faceaudit/report_io.hpp"
#include "faceaudit/pipeline.hpp"
#include "faceaudit/fixture.hpp"
