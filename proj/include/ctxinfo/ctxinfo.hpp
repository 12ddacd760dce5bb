#pragma once

#include "ctxinfo/annotation.hpp"
#include "ctxinfo/baselines.hpp"
#include "ctxinfo/corpus.hpp"
#include "ctxinfo/curriculum.hpp"
#include "ctxinfo/embeddings.hpp"
#include "ctxinfo/error.hpp"
#include "ctxinfo/eval.hpp"
#include "ctxinfo/metrics.hpp"
#include "ctxinfo/pipeline.hpp"
#include "ctxinfo/report.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/scorer.hpp"
#include "ctxinfo/synthetic.hpp"
#include "ctxinfo/tsv.hpp"
