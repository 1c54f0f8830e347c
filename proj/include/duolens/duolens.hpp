#pragma once

#include "duolens/bench.hpp"
#include "duolens/bundle.hpp"
#include "duolens/chunking.hpp"
#include "duolens/config.hpp"
#include "duolens/corpus.hpp"
#include "duolens/encoder.hpp"
#include "duolens/errors.hpp"
#include "duolens/fusion.hpp"
#include "duolens/lexer.hpp"
#include "duolens/metrics.hpp"
#include "duolens/pipeline.hpp"
#include "duolens/sample.hpp"
#include "duolens/synthetic.hpp"
#include "duolens/tensor.hpp"
#include "duolens/tokenizer.hpp"
