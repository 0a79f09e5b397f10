"""Ground truth by exhaustive enumeration of every path in the window.

Nothing here reuses the matrix-product machinery of :mod:`revchain.reversal`:
each path's joint probability is a plain product of table lookups, and all
conditional quantities are ratios of sums over the filtered path list.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainSpec
from .errors import ShapeMismatch, TooLarge
from .reversal import (
    ArbitraryPolicy,
    ObservationWindow,
    ReversedProcess,
    _apply_row_policy,
    _policy_row,
)

DEFAULT_GUARD = 10**7


def enumeration_guard() -> int:
    raw = os.environ.get("REVCHAIN_GUARD")
    return int(float(raw)) if raw else DEFAULT_GUARD


@dataclass(frozen=True, eq=False)
class PathTable:
    """All N**(l+1) paths (eta(0), ..., eta(l)) with their joint probability.

    Paths are ordered lexicographically, so row index equals the base-N
    number spelled by the path.
    """

    length: int
    num_states: int
    paths: np.ndarray
    probs: np.ndarray


def enumerate_joint(chain: ChainSpec, length: int, guard: int | None = None) -> PathTable:
    n = chain.num_states
    guard = enumeration_guard() if guard is None else guard
    count = n ** (length + 1)
    if count > guard:
        raise TooLarge(count, guard)
    chain.require_steps(length)
    dtype = np.min_scalar_type(max(n - 1, 0))
    paths = np.stack(np.unravel_index(np.arange(count), (n,) * (length + 1)), axis=1).astype(dtype)
    probs = chain.initial[paths[:, 0]].copy()
    for t in range(length):
        probs *= chain.step(t)[paths[:, t], paths[:, t + 1]]
    paths.setflags(write=False)
    probs.setflags(write=False)
    return PathTable(length, n, paths, probs)


def _observed_mass(table: PathTable, window: ObservationWindow) -> np.ndarray:
    n, ell = table.num_states, table.length
    keep = window.cl_mask(n)[table.paths[:, 0]] & window.c0_mask(n)[table.paths[:, ell]]
    return np.where(keep, table.probs, 0.0)


def conditional_path_probabilities(table: PathTable, window: ObservationWindow) -> np.ndarray:
    """Pr(path | E_o) for every row of ``table``; all zeros if e == 0."""
    mass = _observed_mass(table, window)
    e = mass.sum()
    return mass / e if e > 0 else mass


def oracle_reverse(
    chain: ChainSpec,
    window: ObservationWindow,
    policy: ArbitraryPolicy = ArbitraryPolicy.ZERO,
    guard: int | None = None,
    table: PathTable | None = None,
) -> ReversedProcess:
    window.check_states(chain.num_states)
    policy = ArbitraryPolicy(policy)
    ell, n = window.length, chain.num_states
    if table is None:
        table = enumerate_joint(chain, ell, guard)
    mass = _observed_mass(table, window)
    e = float(mass.sum())
    paths = table.paths.astype(np.intp)

    pi = np.zeros((ell + 1, n))
    if e > 0:
        for k in range(ell + 1):
            pi[k] = np.bincount(paths[:, ell - k], weights=mass, minlength=n) / e
        pi_defined = np.ones((ell + 1, n), dtype=bool)
    else:
        pi_defined = np.zeros((ell + 1, n), dtype=bool)
        pi[ell] = _policy_row(policy, window.cl_mask(n))
        for k in range(ell):
            pi[k] = _policy_row(policy, window.c0_mask(n) if k == 0 else np.ones(n, dtype=bool))

    p_mats = np.zeros((ell, n, n))
    defined = np.zeros((ell, n), dtype=bool)
    for k in range(ell):
        src, dst = paths[:, ell - k - 1], paths[:, ell - k]
        denom = np.bincount(src, weights=mass, minlength=n)
        joint = np.bincount(src * n + dst, weights=mass, minlength=n * n).reshape(n, n)
        defined[k] = denom > 0
        p_mats[k][defined[k]] = joint[defined[k]] / denom[defined[k], None]
        p_mats[k] = _apply_row_policy(p_mats[k], defined[k], k, window, policy)

    return ReversedProcess(
        pi=pi,
        p_mats=p_mats,
        e=e,
        row_defined=defined,
        pi_defined=pi_defined,
        policy=policy,
        engine="oracle",
    )


@dataclass(frozen=True, eq=False)
class OracleReport:
    """Deviation of a candidate process from a reference.

    ``pi_dev`` and ``p_dev`` hold absolute deviations on mutually defined
    entries and NaN elsewhere. ``mismatches`` lists (kind, k, i, j) tuples,
    1-based in i and j, with j = None for marginal entries and rows.
    """

    reference: ReversedProcess
    tol: float
    e_dev: float
    pi_dev: np.ndarray
    p_dev: np.ndarray
    mismatches: list = field(default_factory=list)
    reference_only: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        vals = [self.e_dev]
        for arr in (self.pi_dev, self.p_dev):
            if np.any(~np.isnan(arr)):
                vals.append(float(np.nanmax(arr)))
        return max(vals)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    @property
    def comparable(self) -> bool:
        """False when no entry was defined in both operands."""
        return bool(np.any(~np.isnan(self.pi_dev)) or np.any(~np.isnan(self.p_dev)))


def compare(candidate: ReversedProcess, reference: ReversedProcess, tol: float = 1e-12) -> OracleReport:
    if candidate.pi.shape != reference.pi.shape or candidate.p_mats.shape != reference.p_mats.shape:
        raise ShapeMismatch(
            f"candidate shapes {candidate.pi.shape}/{candidate.p_mats.shape} vs "
            f"reference {reference.pi.shape}/{reference.p_mats.shape}"
        )
    mismatches, reference_only = [], []

    e_dev = abs(candidate.e - reference.e)
    if not e_dev <= tol:
        mismatches.append(("e", None, None, None))

    both_pi = candidate.pi_defined & reference.pi_defined
    pi_dev = np.where(both_pi, np.abs(np.where(both_pi, candidate.pi - reference.pi, 0.0)), np.nan)
    for k, i in zip(*np.nonzero(both_pi & ~(pi_dev <= tol))):
        mismatches.append(("pi", int(k), int(i) + 1, None))
    for k, i in zip(*np.nonzero(candidate.pi_defined & ~reference.pi_defined)):
        mismatches.append(("pi-undefined-in-reference", int(k), int(i) + 1, None))
    for k, i in zip(*np.nonzero(~candidate.pi_defined & reference.pi_defined)):
        reference_only.append(("pi", int(k), int(i) + 1, None))

    both_rows = candidate.row_defined & reference.row_defined
    both_p = np.broadcast_to(both_rows[:, :, None], candidate.p_mats.shape)
    diff = np.where(both_p, candidate.p_mats - reference.p_mats, 0.0)
    p_dev = np.where(both_p, np.abs(diff), np.nan)
    for k, i, j in zip(*np.nonzero(both_p & ~(p_dev <= tol))):
        mismatches.append(("P", int(k), int(i) + 1, int(j) + 1))
    for k, i in zip(*np.nonzero(candidate.row_defined & ~reference.row_defined)):
        mismatches.append(("P-row-undefined-in-reference", int(k), int(i) + 1, None))
    for k, i in zip(*np.nonzero(~candidate.row_defined & reference.row_defined)):
        reference_only.append(("P-row", int(k), int(i) + 1, None))

    return OracleReport(reference, tol, e_dev, pi_dev, p_dev, mismatches, reference_only)
