#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "wattgov/nn.hpp"
#include "wattgov/ppo.hpp"

namespace wattgov::checkpoint {

// Everything needed to resume or evaluate a training run. env_hash ties the
// parameters to the environment block of the config they were trained with.
struct Checkpoint {
  std::uint64_t env_hash = 0;
  ppo::ActorCritic agent;
  nn::AdamState actor_opt;
  nn::AdamVecState log_std_opt;
  nn::AdamState critic_opt;
};

// Line-oriented text, parameters as C hexfloats: exact round-trip, stable
// across runs, diffable. First line: "wattgov-checkpoint 1".
void save(const Checkpoint& ckpt, std::ostream& out);
void save_file(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(std::istream& in);       // raises MalformedRow
Checkpoint load_file(const std::string& path);  // raises NoSuchFile

}  // namespace wattgov::checkpoint
