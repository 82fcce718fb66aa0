"""Markov-chain analysis under a fixed policy.

Chain structure (recurrent classes, periods) is computed graph-
theoretically on the positive-probability graph, so classification never
depends on the magnitudes of kernel entries. Stationary distributions are
solved as linear systems on the recurrent class, which keeps transient
states at exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .model import (
    OccupationMeasure,
    TimeDependentPolicy,
    as_pair_array,
    deterministic_policies,
    polytope_residual,
)

# Edges below this mass are treated as absent; kernel entries are data
# (often exact zeros) but policy rows may carry LP solver noise.
EDGE_TOL = 1e-12

STATIONARY_RESIDUAL_TOL = 1e-10
VERTEX_DEDUP_TOL = 1e-8


class ChainStructureError(RuntimeError):
    """The chain does not have the structure an operation requires."""


def transition_matrix(instance, policy):
    """State transition matrix P^d(j|i) = sum_a d(a|i) P(j|i,a)."""
    probs = as_pair_array(policy)
    out = np.zeros((instance.n_states, instance.n_states))
    np.add.at(out, instance.pair_state, probs[:, None] * instance.kernel)
    return out


@dataclass(frozen=True)
class ChainClassification:
    """Recurrent classes (as sorted state-index tuples), transient states,
    and one aperiodicity flag per class."""

    recurrent_classes: tuple
    transient_states: tuple
    aperiodic: tuple

    @property
    def unichain(self):
        return len(self.recurrent_classes) == 1

    @property
    def unichain_aperiodic(self):
        return self.unichain and all(self.aperiodic)

    def describe(self, instance):
        parts = []
        for cls, ap in zip(self.recurrent_classes, self.aperiodic):
            names = ", ".join(instance.states[i] for i in cls)
            parts.append(f"recurrent {{{names}}}{'' if ap else ' (periodic)'}")
        if self.transient_states:
            names = ", ".join(instance.states[i] for i in self.transient_states)
            parts.append(f"transient {{{names}}}")
        return "; ".join(parts)


def _class_period(adj, members):
    """Period of an irreducible class: gcd of level differences over edges."""
    members = list(members)
    pos = {s: i for i, s in enumerate(members)}
    level = {members[0]: 0}
    frontier = [members[0]]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                v = int(v)
                if v in pos and v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u in members:
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v in pos:
                g = gcd(g, level[u] + 1 - level[v])
    return abs(g) if g != 0 else 1


def classify_chain(instance, policy):
    """Recurrent classes and per-class aperiodicity of the chain under d."""
    M = transition_matrix(instance, policy)
    adj = M > EDGE_TOL
    if adj.all():
        # strictly positive rows: one recurrent class, self-loops everywhere
        return ChainClassification((tuple(range(instance.n_states)),), (), (True,))
    n, labels = connected_components(csr_matrix(adj), connection="strong")
    outgoing = np.zeros(n, dtype=bool)
    rows, cols = np.nonzero(adj)
    for u, v in zip(rows, cols):
        if labels[u] != labels[v]:
            outgoing[labels[u]] = True
    classes = []
    transient = []
    for comp in range(n):
        members = tuple(int(s) for s in np.flatnonzero(labels == comp))
        if outgoing[comp]:
            transient.extend(members)
        else:
            classes.append(members)
    classes.sort(key=lambda c: c[0])
    aperiodic = tuple(_class_period(adj, cls) == 1 for cls in classes)
    return ChainClassification(tuple(classes), tuple(sorted(transient)), aperiodic)


def _class_occupation(instance, policy, members):
    """Occupation measure of one recurrent class under a stationary policy.

    Solves the stationarity system restricted to the class, with the last
    balance row replaced by normalization, then spreads each state's mass
    over its action probabilities.
    """
    probs = as_pair_array(policy)
    members = list(members)
    M = transition_matrix(instance, policy)[np.ix_(members, members)]
    n = len(members)
    A = (np.eye(n) - M).T
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise ChainStructureError(f"singular stationarity system: {e}") from None
    pi[np.abs(pi) < 1e-15] = 0.0
    x = np.zeros(instance.n_pairs)
    for local, s in enumerate(members):
        lo, hi = instance.offsets[s], instance.offsets[s + 1]
        x[lo:hi] = pi[local] * probs[lo:hi]
    residual = polytope_residual(instance, x)
    if residual > STATIONARY_RESIDUAL_TOL:
        raise ChainStructureError(f"stationary solve residual {residual:.3g} too large")
    return OccupationMeasure(x)


def stationary_distribution(instance, policy):
    """Steady-state state-action frequencies of a unichain policy.

    Raises ChainStructureError when the policy induces more than one
    recurrent class (the steady state would depend on the initial state).
    """
    cls = classify_chain(instance, policy)
    if not cls.unichain:
        raise ChainStructureError(
            f"policy is not unichain: {cls.describe(instance)}")
    return _class_occupation(instance, policy, cls.recurrent_classes[0])


def _policy_rows(instance, policy, T):
    """Rule rows for the evolution kernels: (1, n_pairs) for a stationary
    policy, (T, n_pairs) for a time-dependent one."""
    if isinstance(policy, TimeDependentPolicy):
        return policy.rows(T)
    probs = as_pair_array(policy)
    return probs.reshape(1, -1)


def t_step_distribution(instance, policy, s0, t, check_mass=True):
    """Exact law over state-action pairs after t steps from state s0.

    The law at step t spreads the time-t state distribution over the rule
    used at t. No renormalization is applied anywhere; if the mass drifts
    from 1 beyond 1e-12 an error is raised since that indicates a bug.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    s0 = instance.state_index(s0) if isinstance(s0, str) else int(s0)
    rules = _policy_rows(instance, policy, t + 1)
    mu0 = np.zeros(instance.n_states)
    mu0[s0] = 1.0
    mu = _kernels.evolve_mu(instance.kernel, instance.pair_state, rules, mu0, t)
    row = rules[0] if rules.shape[0] == 1 else rules[t]
    pk = mu[instance.pair_state] * row
    if check_mass and abs(pk.sum() - 1.0) > 1e-12:
        raise ChainStructureError(f"probability mass drifted to {pk.sum()!r} at t={t}")
    return pk


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of classifying the chain of every deterministic policy."""

    total: int
    violators: tuple  # (DeterministicPolicy, ChainClassification) pairs

    @property
    def ok(self):
        return not self.violators


def check_assumption(instance, cap=10**6):
    """Classify every deterministic policy; report those that are not
    unichain and aperiodic.

    Passing is a sufficient condition in practice: the solver additionally
    classifies whatever randomized policy it extracts.
    """
    violators = []
    policies = deterministic_policies(instance, cap=cap)
    for dp in policies:
        cls = classify_chain(instance, dp.to_stationary(instance))
        if not cls.unichain_aperiodic:
            violators.append((dp, cls))
    return AssumptionReport(total=len(policies), violators=tuple(violators))


@dataclass(frozen=True)
class VertexSet:
    """Deduplicated extreme points of the occupation polytope.

    xs has one row per vertex; policies[i] is a generating deterministic
    policy for row i (the first one found in canonical order).
    """

    xs: np.ndarray
    policies: tuple

    def __len__(self):
        return self.xs.shape[0]

    def __post_init__(self):
        xs = np.ascontiguousarray(np.asarray(self.xs, dtype=np.float64))
        xs.setflags(write=False)
        object.__setattr__(self, "xs", xs)


def polytope_vertices(instance, cap=10**6):
    """Enumerate the basic feasible solutions of the occupation polytope.

    Every deterministic policy contributes the stationary distribution of
    each of its recurrent classes (one, under the unichain assumption);
    duplicates within componentwise 1e-8 are merged.
    """
    rows = []
    gens = []
    for dp in deterministic_policies(instance, cap=cap):
        pol = dp.to_stationary(instance)
        cls = classify_chain(instance, pol)
        for members in cls.recurrent_classes:
            x = _class_occupation(instance, pol, members).x
            dup = False
            for seen in rows:
                if np.max(np.abs(seen - x)) < VERTEX_DEDUP_TOL:
                    dup = True
                    break
            if not dup:
                rows.append(x)
                gens.append(dp)
    return VertexSet(np.stack(rows), tuple(gens))
