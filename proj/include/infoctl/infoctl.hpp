#pragma once

#include "infoctl/commands.hpp"
#include "infoctl/config.hpp"
#include "infoctl/control.hpp"
#include "infoctl/error.hpp"
#include "infoctl/evidence.hpp"
#include "infoctl/io.hpp"
#include "infoctl/remote_scorer.hpp"
#include "infoctl/reward.hpp"
#include "infoctl/rollout.hpp"
#include "infoctl/simenv.hpp"
#include "infoctl/task.hpp"
#include "infoctl/text.hpp"
#include "infoctl/utility.hpp"
