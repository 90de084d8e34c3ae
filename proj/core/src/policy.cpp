#include "cmh/policy.hpp"

#include "cmh/errors.hpp"

namespace cmh {

EpisodeOutcome run_episode(EnvState& s, Policy& policy) {
  EpisodeOutcome out;
  policy.begin_episode(s);
  while (!s.done) {
    const auto a = policy.act(s);
    if (!a) break;
    if (!is_valid(s, *a)) throw InvalidActionError(policy.name() + " proposed a masked action");
    out.total_reward += step(s, *a).reward;
    ++out.edits_used;
  }
  out.hidden = s.hidden;
  return out;
}

}  // namespace cmh
