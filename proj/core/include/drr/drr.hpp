#pragma once

#include "drr/answer.hpp"
#include "drr/critic.hpp"
#include "drr/distill.hpp"
#include "drr/errors.hpp"
#include "drr/inference.hpp"
#include "drr/jsonl.hpp"
#include "drr/metrics.hpp"
#include "drr/qa_data.hpp"
#include "drr/reasoner.hpp"
#include "drr/remote.hpp"
#include "drr/trainprep.hpp"
#include "drr/version.hpp"
