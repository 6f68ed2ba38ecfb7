#pragma once

#include "cocreate/env.hpp"

namespace cocreate {

// Anything that can pick actions in the environment: fixed plans, the random
// baseline, the trained agent, or an oracle action sequence.  Implementations
// may keep per-episode state (recurrent nets, step counters); begin_episode
// is called right after every env reset.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(std::uint64_t episode_seed) { (void)episode_seed; }
  virtual Action act(const Environment& env) = 0;
};

}  // namespace cocreate
