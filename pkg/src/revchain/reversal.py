"""Closed-form law of the time-reversed chain theta(k) = eta(l - k)
conditioned on the endpoint clusters {eta(l) in C0} and {eta(0) in Cl}.

Conventions: ``P[k][i, j] = Pr(theta(k) = j | theta(k+1) = i, E_o)`` and
``pi[k][i] = Pr(theta(k) = i | E_o)``. Marginals are propagated downward in
k from the terminal law pi(l):

    pi_j(k) = sum_i pi_i(k+1) P[k][i, j]

Every Markov step inside the formulas uses its absolute forward time, so
time-varying chains are handled; the homogeneous case reduces to matrix
powers. Entries whose conditioning event has probability zero are filled by
an :class:`ArbitraryPolicy` and marked undefined.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .chain import (
    ChainSpec,
    Distribution,
    backward_reach,
    restricted_forward_distribution,
)
from .errors import (
    ClusterOutOfRange,
    EmptyCluster,
    ImpossibleObservation,
    ImpossibleObservationWarning,
    StepOutOfRange,
    WindowError,
)


@dataclass(frozen=True)
class ObservationWindow:
    """Window length and the two endpoint clusters (1-based states).

    ``c0`` constrains theta(0) = eta(length); ``cl`` constrains
    theta(length) = eta(0).
    """

    length: int
    c0: frozenset[int]
    cl: frozenset[int]

    def __post_init__(self):
        if not isinstance(self.length, (int, np.integer)) or isinstance(self.length, bool):
            raise WindowError(f"window length must be an integer, got {self.length!r}")
        if self.length < 1:
            raise WindowError(f"window length must be >= 1, got {self.length}")
        object.__setattr__(self, "length", int(self.length))
        for name in ("c0", "cl"):
            states = frozenset(int(s) for s in getattr(self, name))
            if not states:
                raise EmptyCluster(f"cluster {name} is empty")
            if min(states) < 1:
                raise ClusterOutOfRange(f"cluster {name} contains state {min(states)}; states are 1-based")
            object.__setattr__(self, name, states)

    def check_states(self, num_states: int) -> None:
        for name in ("c0", "cl"):
            states = getattr(self, name)
            if max(states) > num_states:
                raise ClusterOutOfRange(
                    f"cluster {name} contains state {max(states)} but the chain has {num_states} states"
                )

    def c0_mask(self, num_states: int) -> np.ndarray:
        self.check_states(num_states)
        return _mask(self.c0, num_states)

    def cl_mask(self, num_states: int) -> np.ndarray:
        self.check_states(num_states)
        return _mask(self.cl, num_states)

    @classmethod
    def full(cls, length: int, num_states: int) -> "ObservationWindow":
        """Window with no information at either end."""
        states = range(1, num_states + 1)
        return cls(length, frozenset(states), frozenset(states))


def _mask(states: Iterable[int], n: int) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[[s - 1 for s in states]] = True
    return m


class ArbitraryPolicy(str, enum.Enum):
    """How to fill entries conditioned on a probability-zero event."""

    ZERO = "zero"
    UNIFORM = "uniform"
    FLAGGED = "flagged"


@dataclass(frozen=True, eq=False)
class ReversedProcess:
    """Law of the conditioned reversed process over one window.

    ``pi`` has shape (l+1, N), ``p_mats`` shape (l, N, N). ``row_defined[k, i]``
    says whether row i of P(k) is conditioned on a positive-probability event;
    ``pi_defined`` is the analogous mask for the marginals.
    """

    pi: np.ndarray
    p_mats: np.ndarray
    e: float
    row_defined: np.ndarray
    pi_defined: np.ndarray
    policy: ArbitraryPolicy
    engine: str = "lemma"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("pi", "p_mats", "row_defined", "pi_defined"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def length(self) -> int:
        return self.p_mats.shape[0]

    @property
    def num_states(self) -> int:
        return self.pi.shape[1]

    def distribution(self, k: int) -> Distribution:
        return Distribution(self.pi[k], k)


def _prepare(chain: ChainSpec, window: ObservationWindow):
    window.check_states(chain.num_states)
    chain.require_steps(window.length)


def _fill_value(policy: ArbitraryPolicy, n_support: int) -> float:
    if policy is ArbitraryPolicy.ZERO:
        return 0.0
    if policy is ArbitraryPolicy.UNIFORM:
        return 1.0 / n_support
    return np.nan


def _policy_row(policy: ArbitraryPolicy, support: np.ndarray) -> np.ndarray:
    """An arbitrary row/vector spread over ``support`` per the policy."""
    row = np.zeros(support.shape[0])
    row[support] = _fill_value(policy, int(support.sum()))
    return row


def normalization_e(chain: ChainSpec, window: ObservationWindow) -> float:
    """Pr(eta(0) in Cl, eta(l) in C0)."""
    _prepare(chain, window)
    n = chain.num_states
    h0 = backward_reach(chain, window.c0_mask(n), window.length)[0]
    cl = window.cl_mask(n)
    return float(np.sum(chain.initial[cl] * h0[cl]))


def reach_weight_g(chain: ChainSpec, window: ObservationWindow, i: int, k: int) -> float:
    """g_i(k) = Pr(eta(l) in C0 | eta(l-k-1) = i) for 0-based state ``i``.

    Valid for 0 <= k <= l-1; k = 0 and k = l-1 give the boundary denominators.
    """
    _prepare(chain, window)
    ell = window.length
    if not 0 <= k <= ell - 1:
        raise StepOutOfRange(f"k={k} outside 0..{ell - 1}")
    if not 0 <= i < chain.num_states:
        raise StepOutOfRange(f"state index {i} outside 0..{chain.num_states - 1}")
    h = backward_reach(chain, window.c0_mask(chain.num_states), ell)
    return float(h[ell - k - 1, i])


def terminal_distribution(
    chain: ChainSpec,
    window: ObservationWindow,
    policy: ArbitraryPolicy = ArbitraryPolicy.ZERO,
    zero_floor: float = 0.0,
) -> Distribution:
    """pi(l), the conditional law of eta(0).

    Zero outside Cl. When the observation is impossible, the Cl entries are
    filled per ``policy``.
    """
    _prepare(chain, window)
    n = chain.num_states
    cl = window.cl_mask(n)
    h0 = backward_reach(chain, window.c0_mask(n), window.length)[0]
    joint = np.where(cl, chain.initial * h0, 0.0)
    e = float(joint.sum())
    if e > zero_floor:
        return Distribution(joint / e, window.length)
    return Distribution(_policy_row(ArbitraryPolicy(policy), cl), window.length)


def _transition_block(
    step: np.ndarray,
    g: np.ndarray,
    reach_next: np.ndarray,
    defined: np.ndarray,
) -> np.ndarray:
    """Rows of P on defined rows: s_ij * reach_next_j / g_i; zeros elsewhere."""
    out = np.zeros_like(step)
    out[defined] = step[defined] * reach_next[None, :] / g[defined, None]
    return out


def _pieces(chain: ChainSpec, window: ObservationWindow):
    n, ell = chain.num_states, window.length
    h = backward_reach(chain, window.c0_mask(n), ell)
    v = np.empty((ell + 1, n))
    v[0] = np.where(window.cl_mask(n), chain.initial, 0.0)
    for t in range(ell):
        v[t + 1] = v[t] @ chain.step(t)
    return h, v


def reverse_transition_matrix(
    chain: ChainSpec,
    window: ObservationWindow,
    k: int,
    policy: ArbitraryPolicy = ArbitraryPolicy.ZERO,
    zero_floor: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """P(k) together with its row-definedness mask.

    Row i is defined iff Pr(theta(k+1) = i, E_o) > zero_floor; that mass
    factors as the Cl-restricted forward mass at eta(l-k-1) times g_i(k).
    """
    _prepare(chain, window)
    ell = window.length
    if not 0 <= k <= ell - 1:
        raise StepOutOfRange(f"k={k} outside 0..{ell - 1}")
    h, v = _pieces(chain, window)
    mats, defined = _all_transitions(chain, window, h, v, zero_floor)
    mat = _apply_row_policy(mats[k], defined[k], k, window, ArbitraryPolicy(policy))
    return mat, defined[k].copy()


def _all_transitions(chain, window, h, v, zero_floor):
    n, ell = chain.num_states, window.length
    mats = np.zeros((ell, n, n))
    defined = np.zeros((ell, n), dtype=bool)
    for k in range(ell):
        t = ell - k - 1
        g = h[t]
        defined[k] = v[t] * g > zero_floor
        mats[k] = _transition_block(chain.step(t), g, h[t + 1], defined[k])
    return mats, defined


def _apply_row_policy(mat, defined, k, window, policy):
    if policy is ArbitraryPolicy.ZERO or defined.all():
        return mat.copy()
    n = mat.shape[0]
    support = window.c0_mask(n) if k == 0 else np.ones(n, dtype=bool)
    out = mat.copy()
    out[~defined] = _policy_row(policy, support)
    return out


def reverse_process(
    chain: ChainSpec,
    window: ObservationWindow,
    policy: ArbitraryPolicy = ArbitraryPolicy.ZERO,
    zero_floor: float = 0.0,
    strict: bool = False,
) -> ReversedProcess:
    """Assemble pi(k), k = 0..l, and P(k), k = 0..l-1.

    With ``strict`` an impossible observation raises
    :class:`ImpossibleObservation`; otherwise a warning is issued and the
    whole output is policy-filled and marked undefined.
    """
    _prepare(chain, window)
    policy = ArbitraryPolicy(policy)
    n, ell = chain.num_states, window.length
    h, v = _pieces(chain, window)
    cl = window.cl_mask(n)
    c0 = window.c0_mask(n)

    mats, defined = _all_transitions(chain, window, h, v, zero_floor)
    joint_l = np.where(cl, chain.initial * h[0], 0.0)
    e = float(joint_l.sum())

    pi = np.zeros((ell + 1, n))
    if e > zero_floor:
        pi_defined = np.ones((ell + 1, n), dtype=bool)
        pi[ell] = joint_l / e
        # undefined rows carry zero pi mass, so the zero-filled blocks are exact
        for k in range(ell - 1, -1, -1):
            pi[k] = pi[k + 1] @ mats[k]
    else:
        if strict:
            raise ImpossibleObservation(
                "Pr(eta(0) in Cl, eta(l) in C0) = 0; the conditional law is arbitrary"
            )
        warnings.warn(
            "observation has probability zero; output is policy-filled",
            ImpossibleObservationWarning,
            stacklevel=2,
        )
        pi_defined = np.zeros((ell + 1, n), dtype=bool)
        pi[ell] = _policy_row(policy, cl)
        for k in range(ell):
            pi[k] = _policy_row(policy, c0 if k == 0 else np.ones(n, dtype=bool))

    p_mats = np.stack([_apply_row_policy(mats[k], defined[k], k, window, policy) for k in range(ell)])
    return ReversedProcess(
        pi=pi,
        p_mats=p_mats,
        e=e,
        row_defined=defined,
        pi_defined=pi_defined,
        policy=policy,
        engine="lemma",
    )


def direct_marginal(chain: ChainSpec, window: ObservationWindow, k: int) -> Distribution:
    """pi(k) computed without propagation, as the normalized product of the
    Cl-restricted forward mass and the backward reach of C0 at eta(l-k)."""
    _prepare(chain, window)
    ell = window.length
    if not 0 <= k <= ell:
        raise StepOutOfRange(f"k={k} outside 0..{ell}")
    t = ell - k
    n = chain.num_states
    h = backward_reach(chain, window.c0_mask(n), ell)[t]
    w = restricted_forward_distribution(chain, window, t) * h
    total = w.sum()
    if not total > 0:
        raise ImpossibleObservation("observation has probability zero")
    return Distribution(w / total, k)


def path_probability(process: ReversedProcess, path: Sequence[int]) -> float:
    """Probability of a reversed path under ``process``.

    ``path`` lists 0-based states in generation order theta(l), ..., theta(0)
    (equivalently eta(0), ..., eta(l)).
    """
    ell = process.length
    if len(path) != ell + 1:
        raise ValueError(f"path must have {ell + 1} states, got {len(path)}")
    n = process.num_states
    if any(not 0 <= s < n for s in path):
        raise ValueError(f"path states must lie in 0..{n - 1}")
    prob = float(process.pi[ell][path[0]])
    for m in range(ell):
        if prob == 0.0:
            return 0.0
        prob *= float(process.p_mats[ell - 1 - m][path[m], path[m + 1]])
    return prob
