#pragma once

#include "altpgd/errors.hpp"
#include "altpgd/rng.hpp"
#include "altpgd/losses.hpp"
#include "altpgd/models.hpp"
#include "altpgd/model_io.hpp"
#include "altpgd/dataset.hpp"
#include "altpgd/schedules.hpp"
#include "altpgd/attack.hpp"
#include "altpgd/toy.hpp"
#include "altpgd/trainer.hpp"
#include "altpgd/eval.hpp"
#include "altpgd/benchmark.hpp"
#include "altpgd/cli_parse.hpp"
