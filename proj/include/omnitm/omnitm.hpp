#pragma once

#include "omnitm/clause_bank.hpp"
#include "omnitm/corpus.hpp"
#include "omnitm/embedding.hpp"
#include "omnitm/evalbench.hpp"
#include "omnitm/feature_set.hpp"
#include "omnitm/io.hpp"
#include "omnitm/rng.hpp"
#include "omnitm/trainer.hpp"
