#pragma once

#include <vector>

#include "natgrad/dag_model.hpp"
#include "natgrad/random.hpp"

namespace natgrad {

/// Binary sigmoid net on `nodes` units. Each node draws its parents from
/// the earlier nodes (each with probability 1/2, at most `max_parents`).
/// The last `visible_count` units are visible.
DagModel random_sigmoid_net(Rng& rng, int nodes, int visible_count, int max_parents = 3);

/// Units of cardinality 2 or 3 with a mix of exponential-family, tabular
/// and (where possible) sigmoid kernels.
DagModel random_mixed_net(Rng& rng, int nodes, int visible_count, int max_parents = 2);

/// Random exponential-family kernel spec for a unit with the given parent
/// configuration count and cardinality.
KernelSpec random_exp_family_spec(Rng& rng, std::int64_t parent_configs, int cardinality, int statistics);

/// n visible units fed by l * n hidden units. Shallow: one hidden layer of
/// l * n roots, all connected to every visible unit. Deep: l hidden layers
/// of n units, each fully connected to the next, the last to the visible
/// units. Visible units come first.
DagModel layered_sigmoid_net(int n, int l, bool deep);

/// Two hidden roots h0, h1 both feeding visible v0, v1 (units v0, v1, h0, h1).
DagModel acceptance_net();

/// Correlated target (0.4, 0.1, 0.1, 0.4) over the acceptance net's visible units.
JointTable acceptance_target();

/// Strictly positive random table over the visible units.
JointTable random_target(const DagModel& model, Rng& rng);

}  // namespace natgrad
