#pragma once

#include "sdoh/corpus.hpp"
#include "sdoh/error.hpp"
#include "sdoh/linear_model.hpp"
#include "sdoh/linker.hpp"
#include "sdoh/pipeline.hpp"
#include "sdoh/rng.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/scorer.hpp"
#include "sdoh/selector.hpp"
#include "sdoh/synth.hpp"
#include "sdoh/tagger.hpp"
#include "sdoh/textproc.hpp"
#include "sdoh/types.hpp"
#include "sdoh/utf8.hpp"
