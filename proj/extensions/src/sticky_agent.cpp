#include "valrl/errors.hpp"
#include "valrl_ext/agents.hpp"

namespace valrl_ext {

namespace {

double read_repeat_probability(const valrl::agents::AgentContext& context) {
  static const valrl::config::ConfigSet empty;
  valrl::config::ConfigReader reader(context.config ? *context.config : empty, context.registry, "StickyAgent");
  return reader.get_double("repeat_probability", 0.9);
}

}  // namespace

StickyAgent::StickyAgent(const valrl::agents::AgentContext& context)
    : StickyAgent(context.num_actions, read_repeat_probability(context), context.seed) {}

StickyAgent::StickyAgent(std::size_t num_actions, double repeat_probability, std::uint64_t seed)
    : num_actions_(num_actions), repeat_probability_(repeat_probability), rng_(valrl::Rng::substream(seed, "agent")) {
  if (num_actions_ < 1) throw valrl::ContractViolation("StickyAgent: no actions");
  if (!(repeat_probability_ >= 0.0 && repeat_probability_ <= 1.0)) {
    throw valrl::ConfigError("StickyAgent.repeat_probability must lie in [0, 1]");
  }
}

int StickyAgent::act() {
  // One uniform draw per decision keeps the stream aligned either way.
  const double u = rng_.uniform();
  if (previous_ && u < repeat_probability_) return *previous_;
  previous_ = static_cast<int>(rng_.uniform_index(num_actions_));
  return *previous_;
}

int StickyAgent::begin_episode(const valrl::envs::Frame&) { return act(); }
int StickyAgent::step(double, const valrl::envs::Frame&) { return act(); }
void StickyAgent::end_episode(double, bool) {}

valrl::archive::Bytes StickyAgent::bundle() const {
  valrl::archive::Writer w;
  w.add_string("agent", name());
  w.add_string("rng", rng_.state());
  const std::int64_t prev = previous_ ? *previous_ : -1;
  w.add_i64("previous", std::span(&prev, 1));
  w.add_scalar("eval_mode", eval_mode_ ? 1 : 0);
  return w.finish();
}

void StickyAgent::unbundle(std::span<const std::uint8_t> bytes) {
  valrl::archive::Reader r(bytes);
  if (r.string("agent") != name()) throw valrl::RestoreError("bundle does not belong to a sticky agent");
  rng_.set_state(r.string("rng"));
  const auto prev = r.i64("previous");
  if (prev.size() != 1) throw valrl::RestoreError("sticky agent bundle: bad previous action");
  previous_ = prev[0] < 0 ? std::nullopt : std::optional<int>(static_cast<int>(prev[0]));
  eval_mode_ = r.scalar("eval_mode") != 0;
}

namespace {
const valrl::agents::AgentRegistrar kRegistrar("sticky", [](const valrl::agents::AgentContext& c) {
  return std::make_unique<StickyAgent>(c);
});
}  // namespace

}  // namespace valrl_ext
