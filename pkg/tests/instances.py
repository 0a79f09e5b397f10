"""Random chain/window generators shared by the test modules."""

import numpy as np

from revchain import ChainSpec, ObservationWindow


def stochastic_matrix(rng, n, sparsity=0.3):
    m = rng.random((n, n)) * (rng.random((n, n)) >= sparsity)
    dead = m.sum(axis=1) == 0
    m[dead, rng.integers(0, n, dead.sum())] = 1.0
    return m / m.sum(axis=1, keepdims=True)


def probability_vector(rng, n, sparsity=0.2):
    v = rng.random(n) * (rng.random(n) >= sparsity)
    if v.sum() == 0:
        v[rng.integers(n)] = 1.0
    return v / v.sum()


def random_cluster(rng, n):
    states = [s for s in range(1, n + 1) if rng.random() < 0.5]
    return frozenset(states or [int(rng.integers(1, n + 1))])


def random_chain(rng, n, length, homogeneous, sparsity=0.3):
    init = probability_vector(rng, n, sparsity=min(sparsity, 0.5))
    if homogeneous:
        return ChainSpec.from_homogeneous(stochastic_matrix(rng, n, sparsity), init)
    return ChainSpec.from_per_step([stochastic_matrix(rng, n, sparsity) for _ in range(length)], init)


def random_instance(rng, max_states=4, max_length=5, homogeneous=None, sparsity=None):
    n = int(rng.integers(1, max_states + 1))
    length = int(rng.integers(1, max_length + 1))
    if homogeneous is None:
        homogeneous = bool(rng.random() < 0.5)
    if sparsity is None:
        sparsity = float(rng.choice([0.0, 0.3, 0.6]))
    chain = random_chain(rng, n, length, homogeneous, sparsity)
    window = ObservationWindow(length, random_cluster(rng, n), random_cluster(rng, n))
    return chain, window


def instance_suite(seed, count, **kw):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, **kw) for _ in range(count)]


def adversarial_suite():
    """Hand-built corner cases: absorbing states, unreachable clusters,
    deterministic chains, zero initial mass."""
    out = []
    ident = np.eye(3)
    out.append((ChainSpec.from_homogeneous(ident, [0.2, 0.3, 0.5]), ObservationWindow(3, {1}, {1, 2, 3})))
    out.append((ChainSpec.from_homogeneous(ident, [0.2, 0.3, 0.5]), ObservationWindow(2, {1}, {2})))
    perm = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    out.append((ChainSpec.from_homogeneous(perm, [1, 0, 0]), ObservationWindow(4, {2}, {1, 3})))
    out.append((ChainSpec.from_homogeneous(perm, [1, 0, 0]), ObservationWindow(3, {1, 2}, {1})))
    absorbing = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
    out.append((ChainSpec.from_homogeneous(absorbing, [0, 1, 0]), ObservationWindow(2, {2, 3}, {1, 2})))
    out.append((ChainSpec.from_homogeneous(absorbing, [1 / 3] * 3), ObservationWindow(5, {1}, {1, 3})))
    out.append((ChainSpec.from_per_step([absorbing, np.eye(3), perm],
                                        [0.5, 0.0, 0.5]), ObservationWindow(3, {1, 2}, {1, 2, 3})))
    out.append((ChainSpec.from_homogeneous([[1.0]], [1.0]), ObservationWindow(4, {1}, {1})))
    return out
