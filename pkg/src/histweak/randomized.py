"""Seeded random instances for property checks.

Every generator takes a ``numpy.random.Generator``; callers build it with
``numpy.random.default_rng(seed)`` so runs are reproducible.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from . import linalg as la
from .histories import HistorySpace, SegmentedEvolution
from .pointer import PointerInstance

MIN_OVERLAP = 0.2


def rng_from(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(n, random_state=rng)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_family(n: int, rng: np.random.Generator, ranked: bool = True) -> la.ProjectorFamily:
    """Complete orthogonal family from a random basis; with ``ranked`` members may have rank > 1."""
    u = random_unitary(n, rng)
    if not ranked or n == 1:
        return la.family_from_unitary(u)
    cuts = sorted(rng.choice(np.arange(1, n), size=rng.integers(0, n), replace=False))
    bounds = [0, *cuts, n]
    groups = [list(range(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]
    return la.family_from_unitary(u, groups)


def random_sparse_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unitary with structural zeros: a permuted block-diagonal of random blocks."""
    sizes = []
    left = n
    while left:
        s = int(rng.integers(1, min(2, left) + 1))
        sizes.append(s)
        left -= s
    u = np.zeros((n, n), dtype=complex)
    at = 0
    for s in sizes:
        u[at:at + s, at:at + s] = random_unitary(s, rng)
        at += s
    rows = rng.permutation(n)
    cols = rng.permutation(n)
    return u[np.ix_(rows, cols)]


def _pre_post(n, rng, ev, min_overlap):
    total = ev.total()
    for _ in range(1000):
        pre, post = random_state(n, rng), random_state(n, rng)
        if abs(np.vdot(post, total @ pre)) >= min_overlap:
            return pre, post
    raise RuntimeError("could not draw states with the requested overlap")


def random_history_space(
    n: int,
    k: int,
    rng: np.random.Generator,
    sparse: bool = False,
    ranked: bool = True,
    min_overlap: float = MIN_OVERLAP,
) -> tuple[HistorySpace, SegmentedEvolution]:
    """Random complete space with pre/post states whose transition amplitude is at least ``min_overlap``.

    ``sparse`` uses computational-basis families and block-sparse unitaries so
    that continuity pruning has something to prune.
    """
    if sparse:
        for _ in range(1000):
            ev = SegmentedEvolution([random_sparse_unitary(n, rng) for _ in range(k + 1)])
            families = tuple(la.basis_family(n) for _ in range(k))
            pre, post = la.basis(n, int(rng.integers(n))), None
            column = ev.total() @ pre
            reachable = np.flatnonzero(np.abs(column) > min_overlap)
            if reachable.size:
                post = la.basis(n, int(rng.choice(reachable)))
                return HistorySpace(families, pre, post), ev
        raise RuntimeError("could not draw a connected sparse instance")
    ev = SegmentedEvolution([random_unitary(n, rng) for _ in range(k + 1)])
    families = tuple(random_family(n, rng, ranked) for _ in range(k))
    pre, post = _pre_post(n, rng, ev, min_overlap)
    return HistorySpace(families, pre, post), ev


def random_pointer_instance(
    rng: np.random.Generator,
    sequential: bool = False,
    free: bool = False,
    n: int = 2,
    min_overlap: float = MIN_OVERLAP,
) -> PointerInstance:
    """Random two-level pointer instance with observables of spectral radius at most 1.

    ``free`` sets every evolution segment to the identity.
    """
    k = 2 if sequential else 1
    if free:
        ev = SegmentedEvolution.identity(n, k)
    else:
        ev = SegmentedEvolution([random_unitary(n, rng) for _ in range(k + 1)])
    pre, post = _pre_post(n, rng, ev, min_overlap)
    obs = []
    for t in range(1, k + 1):
        h = random_hermitian(n, rng)
        h = h / max(np.max(np.abs(np.linalg.eigvalsh(h))), 1e-12)
        obs.append((t, h))
    return PointerInstance(pre, post, ev, tuple(obs))
