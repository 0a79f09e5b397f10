"""Rejection-sampling estimates and sampling of the reversed process.

Random streams are split into fixed chunks of ``CHUNK`` paths. Chunk ``c``
draws from a generator seeded by ``SeedSequence(seed, spawn_key=(c,))``, so
the output depends only on (seed, n) and not on how chunks are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec
from .errors import NoAcceptedSamples, UndefinedRowReached
from .reversal import ArbitraryPolicy, ObservationWindow, ReversedProcess

CHUNK = 2**14
BAND_Z = 4.0


def _chunk_rng(seed: int, c: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))


def _cdf(probs: np.ndarray) -> np.ndarray:
    # trailing zero-probability states end up at exactly 1.0 and are never drawn
    c = np.cumsum(probs, axis=-1)
    return c / c[..., -1:]


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.sum(u[:, None] >= cdf_rows, axis=1)


def _run_chunks(fn, n: int, seed: int, workers: int):
    sizes = [min(CHUNK, n - start) for start in range(0, n, CHUNK)]
    jobs = [(c, m) for c, m in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: fn(_chunk_rng(seed, job[0]), job[1]), jobs))
    else:
        parts = [fn(_chunk_rng(seed, c), m) for c, m in jobs]
    return np.concatenate(parts, axis=0)


def sample_paths(chain: ChainSpec, length: int, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """``n`` i.i.d. forward paths, shape (n, length+1), column t = eta(t)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chain.require_steps(length)
    init_cdf = _cdf(chain.initial)
    step_cdfs = [_cdf(chain.step(t)) for t in range(length)]

    def chunk(rng, m):
        u = rng.random((m, length + 1))
        out = np.empty((m, length + 1), dtype=np.intp)
        out[:, 0] = np.searchsorted(init_cdf, u[:, 0], side="right")
        for t in range(length):
            out[:, t + 1] = _draw(step_cdfs[t][out[:, t]], u[:, t + 1])
        return out

    return _run_chunks(chunk, n, seed, workers)


def sample_reversed(process: ReversedProcess, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """``n`` paths of the reversed process, shape (n, l+1), in generation
    order: column m holds theta(l - m)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if process.policy is not ArbitraryPolicy.ZERO:
        raise ValueError("sampling requires a process built with the zero policy")
    if not process.pi_defined.all():
        raise UndefinedRowReached("terminal law is undefined (observation has probability zero)")
    ell = process.length
    start_cdf = _cdf(process.pi[ell])
    p_cdfs = [_cdf(np.where(process.row_defined[k][:, None], process.p_mats[k], 1.0)) for k in range(ell)]

    def chunk(rng, m):
        u = rng.random((m, ell + 1))
        out = np.empty((m, ell + 1), dtype=np.intp)
        out[:, 0] = np.searchsorted(start_cdf, u[:, 0], side="right")
        for step in range(ell):
            k = ell - 1 - step
            cur = out[:, step]
            if not process.row_defined[k][cur].all():
                bad = int(cur[~process.row_defined[k][cur]][0])
                raise UndefinedRowReached(f"reached undefined row {bad + 1} of P({k})")
            out[:, step + 1] = _draw(p_cdfs[k][cur], u[:, step + 1])
        return out

    return _run_chunks(chunk, n, seed, workers)


@dataclass(frozen=True, eq=False)
class McEstimate:
    n: int
    accepted: int
    seed: int
    e: float
    e_se: float
    pi: np.ndarray
    pi_se: np.ndarray
    p_mats: np.ndarray
    p_se: np.ndarray
    row_counts: np.ndarray

    @property
    def row_estimated(self) -> np.ndarray:
        return self.row_counts > 0

    def to_process(self) -> ReversedProcess:
        ell, n = self.p_mats.shape[:2]
        return ReversedProcess(
            pi=self.pi,
            p_mats=self.p_mats,
            e=self.e,
            row_defined=self.row_estimated,
            pi_defined=np.ones((ell + 1, n), dtype=bool),
            policy=ArbitraryPolicy.ZERO,
            engine="mc",
            meta={"samples": self.n, "accepted": self.accepted, "seed": self.seed},
        )


def _binomial_se(p, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(m > 0, np.sqrt(p * (1.0 - p) / np.maximum(m, 1)), 0.0)


def mc_estimate(
    chain: ChainSpec, window: ObservationWindow, n: int, seed: int, workers: int = 1
) -> McEstimate:
    window.check_states(chain.num_states)
    ell, ns = window.length, chain.num_states
    paths = sample_paths(chain, ell, n, seed, workers)
    keep = window.cl_mask(ns)[paths[:, 0]] & window.c0_mask(ns)[paths[:, ell]]
    acc = paths[keep]
    m = acc.shape[0]
    if m == 0:
        raise NoAcceptedSamples(f"no path out of {n} satisfied the observation")
    e_hat = m / n

    pi = np.empty((ell + 1, ns))
    for k in range(ell + 1):
        pi[k] = np.bincount(acc[:, ell - k], minlength=ns) / m
    pi_se = _binomial_se(pi, m)

    p_mats = np.zeros((ell, ns, ns))
    counts = np.zeros((ell, ns), dtype=np.int64)
    for k in range(ell):
        src, dst = acc[:, ell - k - 1], acc[:, ell - k]
        counts[k] = np.bincount(src, minlength=ns)
        joint = np.bincount(src * ns + dst, minlength=ns * ns).reshape(ns, ns)
        rows = counts[k] > 0
        p_mats[k][rows] = joint[rows] / counts[k][rows, None]
    p_se = _binomial_se(p_mats, counts[:, :, None])

    return McEstimate(
        n=n,
        accepted=m,
        seed=seed,
        e=e_hat,
        e_se=float(np.sqrt(e_hat * (1 - e_hat) / n)),
        pi=pi,
        pi_se=pi_se,
        p_mats=p_mats,
        p_se=p_se,
        row_counts=counts,
    )


def band_violations(est: McEstimate, reference: ReversedProcess, z: float = BAND_Z) -> list:
    """Entries where the estimate is more than ``z`` standard errors from
    ``reference``.

    The standard error is evaluated at the reference value (binomial, given
    the conditioning count), so a reference value of exactly 0 or 1 demands
    an exact match. Returns (kind, k, i, j, estimate, reference, zscore)
    tuples with 1-based states.
    """
    out = []

    def check(kind, k, i, j, est_val, ref_val, count):
        p = min(max(ref_val, 0.0), 1.0)
        se = np.sqrt(p * (1.0 - p) / count)
        dev = abs(est_val - ref_val)
        if se == 0.0:
            if dev > 1e-12:
                out.append((kind, k, i, j, est_val, ref_val, np.inf))
        elif dev > z * se:
            out.append((kind, k, i, j, est_val, ref_val, dev / se))

    check("e", None, None, None, est.e, reference.e, est.n)
    ell, ns = est.p_mats.shape[:2]
    if reference.pi_defined.all():
        for k in range(ell + 1):
            for i in range(ns):
                check("pi", k, i + 1, None, est.pi[k, i], reference.pi[k, i], est.accepted)
    for k in range(ell):
        for i in range(ns):
            if est.row_counts[k, i] == 0:
                continue
            if not reference.row_defined[k, i]:
                out.append(("P-row-undefined-in-reference", k, i + 1, None, None, None, np.inf))
                continue
            for j in range(ns):
                check("P", k, i + 1, j + 1, est.p_mats[k, i, j], reference.p_mats[k, i, j], est.row_counts[k, i])
    return out
