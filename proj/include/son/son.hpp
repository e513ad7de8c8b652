#pragma once

#include "son/core.hpp"
#include "son/action.hpp"
#include "son/env.hpp"
#include "son/reason.hpp"
#include "son/kb.hpp"
#include "son/learn.hpp"
#include "son/optimize.hpp"
#include "son/agent.hpp"
#include "son/harness/scenario.hpp"
#include "son/harness/mdp.hpp"
#include "son/harness/run.hpp"
