"""The underlying forward chain: validation, forward distributions and
multi-step transition products.

State indices are 0-based inside arrays. Cluster sets carried by an
``ObservationWindow`` are 1-based and converted through its mask helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping, Sequence

import numpy as np

from .errors import (
    ChainValidationError,
    DimensionMismatch,
    InitialNotDistribution,
    InsufficientSteps,
    NegativeEntry,
    RowNotStochastic,
    StepOutOfRange,
)

if TYPE_CHECKING:
    from .reversal import ObservationWindow

INPUT_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A validated finite Markov chain.

    ``transitions`` has shape (T, N, N). When ``homogeneous`` is set, T == 1
    and the single matrix is reused for every step.
    """

    num_states: int
    transitions: np.ndarray
    initial: np.ndarray
    homogeneous: bool

    @property
    def n_steps(self) -> int | None:
        """Number of supplied steps, or None when unlimited."""
        return None if self.homogeneous else self.transitions.shape[0]

    def step(self, t: int) -> np.ndarray:
        """Transition matrix from eta(t) to eta(t+1)."""
        if t < 0:
            raise StepOutOfRange(f"negative step {t}")
        if self.homogeneous:
            return self.transitions[0]
        if t >= self.transitions.shape[0]:
            raise StepOutOfRange(
                f"step {t} requested, only {self.transitions.shape[0]} matrices supplied"
            )
        return self.transitions[t]

    def require_steps(self, length: int) -> None:
        if not self.homogeneous and self.transitions.shape[0] < length:
            raise InsufficientSteps(self.transitions.shape[0], length)

    @classmethod
    def from_homogeneous(cls, matrix, initial) -> "ChainSpec":
        return validate_chain({"transitions": {"homogeneous": matrix}, "initial": initial})

    @classmethod
    def from_per_step(cls, matrices, initial) -> "ChainSpec":
        return validate_chain({"transitions": {"per_step": matrices}, "initial": initial})


@dataclass(frozen=True, eq=False)
class Distribution:
    probs: np.ndarray
    time_index: int

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))

    @property
    def is_null(self) -> bool:
        """True for the all-zero vector produced by impossible conditioning."""
        return not np.any(self.probs)


@dataclass(frozen=True, eq=False)
class WindowProduct:
    start: int
    stop: int
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))


def _as_matrix_stack(transitions: Any) -> tuple[np.ndarray, bool]:
    if isinstance(transitions, Mapping):
        keys = set(transitions)
        if keys == {"homogeneous"}:
            mats, homogeneous = [transitions["homogeneous"]], True
        elif keys == {"per_step"}:
            mats, homogeneous = list(transitions["per_step"]), False
        else:
            raise ChainValidationError(
                "transitions must have exactly one of 'homogeneous' or 'per_step'"
            )
    else:
        raise ChainValidationError("transitions must be a mapping")
    if not mats:
        raise DimensionMismatch("per_step list is empty")
    try:
        stack = np.array(mats, dtype=float)
    except (ValueError, TypeError) as exc:
        raise DimensionMismatch(f"transition matrices are ragged or non-numeric: {exc}") from None
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise DimensionMismatch(f"transition matrices must be square, got shape {stack.shape[1:]}")
    return stack, homogeneous


def validate_chain(raw: Mapping[str, Any], length: int | None = None) -> ChainSpec:
    """Validate and renormalize a raw chain description.

    ``raw`` follows the chain file layout: ``transitions`` (either
    ``{"homogeneous": M}`` or ``{"per_step": [M0, M1, ...]}``), ``initial``
    and optionally ``num_states``. If ``length`` is given, a per-step chain
    must supply at least that many matrices.
    """
    if "transitions" not in raw or "initial" not in raw:
        raise ChainValidationError("chain needs 'transitions' and 'initial'")
    stack, homogeneous = _as_matrix_stack(raw["transitions"])
    n = stack.shape[1]
    if n == 0:
        raise DimensionMismatch("chain has no states")
    declared = raw.get("num_states")
    if declared is not None and declared != n:
        raise DimensionMismatch(f"num_states is {declared} but matrices are {n}x{n}")
    try:
        init = np.array(raw["initial"], dtype=float)
    except (ValueError, TypeError):
        raise InitialNotDistribution("initial distribution is not numeric") from None
    if init.shape != (n,):
        raise DimensionMismatch(f"initial distribution has shape {init.shape}, expected ({n},)")
    if not np.all(np.isfinite(stack)):
        raise ChainValidationError("transition matrices contain non-finite values")

    for k, mat in enumerate(stack):
        neg = np.argwhere(mat < 0)
        if neg.size:
            i, j = neg[0]
            raise NegativeEntry(k, int(i) + 1, int(j) + 1, float(mat[i, j]))
        sums = mat.sum(axis=1)
        for i, total in enumerate(sums):
            if abs(total - 1.0) > INPUT_TOL:
                raise RowNotStochastic(k, i + 1, float(total))

    if not np.all(np.isfinite(init)) or np.any(init < 0) or abs(init.sum() - 1.0) > INPUT_TOL:
        raise InitialNotDistribution(f"initial vector {init.tolist()} is not a distribution")

    stack = stack / stack.sum(axis=2, keepdims=True)
    init = init / init.sum()
    chain = ChainSpec(n, _frozen(stack), _frozen(init), homogeneous)
    if length is not None:
        chain.require_steps(length)
    return chain


def _check_step_range(chain: ChainSpec, k: int) -> None:
    if k < 0:
        raise StepOutOfRange(f"negative step index {k}")
    if chain.n_steps is not None and k > chain.n_steps:
        raise StepOutOfRange(f"step {k} beyond the {chain.n_steps} supplied matrices")


def _propagate(chain: ChainSpec, v: np.ndarray, k: int) -> np.ndarray:
    for t in range(k):
        v = v @ chain.step(t)
    return v


def forward_distribution(chain: ChainSpec, k: int) -> Distribution:
    """Marginal law of eta(k)."""
    _check_step_range(chain, k)
    return Distribution(_propagate(chain, chain.initial, k), k)


def restricted_forward_distribution(
    chain: ChainSpec, window: "ObservationWindow", k: int
) -> np.ndarray:
    """Sub-probability vector Pr(eta(k) = i, eta(0) in C_l)."""
    if not 0 <= k <= window.length:
        raise StepOutOfRange(f"step {k} outside window 0..{window.length}")
    _check_step_range(chain, k)
    v = np.where(window.cl_mask(chain.num_states), chain.initial, 0.0)
    out = _propagate(chain, v, k)
    out.setflags(write=False)
    return out


def window_product(chain: ChainSpec, a: int, b: int) -> WindowProduct:
    """Ordered product S(a) S(a+1) ... S(b-1); entry (i, j) is
    Pr(eta(b) = j | eta(a) = i)."""
    if not 0 <= a <= b:
        raise StepOutOfRange(f"need 0 <= a <= b, got a={a}, b={b}")
    _check_step_range(chain, b)
    mat = np.eye(chain.num_states)
    for t in range(a, b):
        mat = mat @ chain.step(t)
    return WindowProduct(a, b, mat)


def backward_reach(chain: ChainSpec, target: np.ndarray, length: int) -> np.ndarray:
    """Rows h[t, i] = Pr(eta(length) in target | eta(t) = i), t = 0..length.

    ``target`` is a boolean mask over states. Computed by the backward
    recursion h[t] = S(t) h[t+1], i.e. h[t] = window_product(t, length) @ 1_target.
    """
    n = chain.num_states
    h = np.empty((length + 1, n))
    h[length] = np.asarray(target, dtype=float)
    for t in range(length - 1, -1, -1):
        h[t] = chain.step(t) @ h[t + 1]
    return h


def stack_for_window(chain: ChainSpec, length: int) -> Sequence[np.ndarray]:
    """The matrices S(0), ..., S(length-1) governing a window."""
    chain.require_steps(length)
    return [chain.step(t) for t in range(length)]
