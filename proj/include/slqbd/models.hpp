#pragma once

#include <map>
#include <string>
#include <vector>

#include "slqbd/chain.hpp"

namespace slqbd::models {

enum class Family {
  Priority,          // two classes, one server, class 1 preempts the stage
  LongestQueue,      // two symmetric queues, server picks the longer one
  BatchPriority,     // priority with batch arrivals in the stage direction
  LongestQueueHetero, // longest-queue with per-queue arrival rates
  Raw,               // explicit block input
};

std::string to_string(Family f);

struct ModelSpec {
  Family family = Family::Priority;
  double lambda1 = 0, lambda2 = 0; // per-flow arrival rates
  double lambda = 0;               // symmetric arrival rate (longest-queue)
  double mu = 0;                   // service rate
  std::map<int, double> batch1;    // stage-direction batch size distribution
  std::map<int, double> batch2;    // level-direction, restricted to {1: 1}
  int levels = 0, stages = 0;      // truncation caps (counts)
  std::vector<Matrix> raw_W, raw_U, raw_D;

  static ModelSpec from_json_text(const std::string& text);
  static ModelSpec from_file(const std::string& path);
  std::string to_json_text() const;

  // Offered load of the unbounded model; >= 1 means no steady state.
  // NaN for raw input.
  double offered_load() const;
};

LevelBlockChain build_priority(double lambda1, double lambda2, double mu,
                               int levels, int stages);
LevelBlockChain build_longest_queue(double lambda, double mu, int levels,
                                    int stages);
LevelBlockChain build_batch_priority(double lambda1, double lambda2,
                                     double mu,
                                     const std::map<int, double>& batch1,
                                     const std::map<int, double>& batch2,
                                     int levels, int stages);
// Grid caps: queue 1 holds 0..cap1-1 customers, queue 2 0..cap2-1. Levels
// are the L-shaped shells of the grid; their sizes shrink by one per side
// as the shells move inward.
LevelBlockChain build_longest_queue_hetero(double lambda1, double lambda2,
                                           double mu, int cap1, int cap2);

// Dispatch on spec.family, attaching a stability warning to the chain
// meta when the offered load reaches 1.
LevelBlockChain build_chain(const ModelSpec& spec);

} // namespace slqbd::models
