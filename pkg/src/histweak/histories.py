"""Coarse-grained histories, chain operators and Feynman summation.

Times are addressed by ordinal index: 0 is the initial time, ``1..k`` are
the intermediate times and ``k + 1`` is the final time. Segment ``j`` of a
:class:`SegmentedEvolution` carries the system from time ``j`` to ``j + 1``.

A history is a choice of one family member per intermediate time and is
kept as an index tuple; operators are only multiplied out on demand.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator, Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionMismatch, ShapeMismatch, SizeOverflow, ValidationError

TAU_PRUNE = 1e-12
MAX_HISTORIES = 10**7


@dataclass(frozen=True)
class TimeGrid:
    intermediate_count: int

    def __post_init__(self):
        if self.intermediate_count < 0:
            raise ValidationError("intermediate_count must be >= 0")

    @property
    def labels(self) -> tuple[str, ...]:
        k = self.intermediate_count
        return ("t_i", *(f"t_{j}" for j in range(1, k + 1)), "t_f")

    def __len__(self):
        return self.intermediate_count + 2


class SegmentedEvolution:
    """k + 1 evolution segments between k + 2 ordered times.

    ``check_unitary=False`` admits non-unitary propagators (truncated path
    bases of interferometer networks); every formula downstream is linear
    and stays well defined.
    """

    def __init__(self, segments: Sequence, check_unitary: bool = True):
        if len(segments) == 0:
            raise ValidationError("need at least one segment")
        check = la.validate_unitary if check_unitary else la.as_operator
        self.segments = tuple(check(s) for s in segments)
        dims = {s.shape[0] for s in self.segments}
        if len(dims) != 1:
            raise DimensionMismatch(f"segments have mixed dimensions {sorted(dims)}")
        self.dim = dims.pop()
        self.grid = TimeGrid(len(self.segments) - 1)
        self.unitary = check_unitary

    @classmethod
    def identity(cls, dim: int, k: int) -> "SegmentedEvolution":
        return cls([np.eye(dim)] * (k + 1))

    @property
    def k(self) -> int:
        return self.grid.intermediate_count

    def propagator(self, start: int, stop: int) -> np.ndarray:
        """Evolution operator from time ``start`` to time ``stop`` (``start <= stop``)."""
        if not 0 <= start <= stop <= self.k + 1:
            raise ValidationError(f"bad time range {start}..{stop} for k={self.k}")
        out = np.eye(self.dim, dtype=complex)
        for seg in self.segments[start:stop]:
            out = seg @ out
        return out

    def total(self) -> np.ndarray:
        return self.propagator(0, self.k + 1)

    def reversed_adjoint(self) -> "SegmentedEvolution":
        """Segments of the time-reversed process (adjoints in reverse order)."""
        return SegmentedEvolution([la.dagger(s) for s in reversed(self.segments)], self.unitary)


@dataclass(frozen=True, eq=False)
class QuantumHistory:
    pre: la.Projector
    post: la.Projector
    intermediates: tuple[la.Projector, ...]
    indices: tuple[int, ...] | None = None

    @property
    def k(self) -> int:
        return len(self.intermediates)

    @property
    def slots(self) -> tuple[la.Projector, ...]:
        return (self.pre, *self.intermediates, self.post)

    @property
    def dim(self) -> int:
        return self.pre.dim


@dataclass(frozen=True, eq=False)
class HistorySpace:
    families: tuple[la.ProjectorFamily, ...]
    pre_state: np.ndarray
    post_state: np.ndarray
    max_histories: int = MAX_HISTORIES
    labels: tuple[tuple[str, ...], ...] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "pre_state", la.as_state(self.pre_state))
        object.__setattr__(self, "post_state", la.as_state(self.post_state))
        n = self.pre_state.size
        if self.post_state.size != n:
            raise DimensionMismatch("pre and post states differ in dimension")
        for fam in self.families:
            if fam.dim != n:
                raise DimensionMismatch(f"family of dim {fam.dim} in a space of dim {n}")

    @property
    def dim(self) -> int:
        return self.pre_state.size

    @property
    def k(self) -> int:
        return len(self.families)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(f) for f in self.families)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object)) if self.families else 1

    @property
    def pre_projector(self) -> la.Projector:
        return _cached(self, "_pre", lambda: la.projector_onto(self.pre_state))

    @property
    def post_projector(self) -> la.Projector:
        return _cached(self, "_post", lambda: la.projector_onto(self.post_state))

    def history(self, indices: Sequence[int]) -> QuantumHistory:
        indices = tuple(int(i) for i in indices)
        if len(indices) != self.k:
            raise ShapeMismatch(f"expected {self.k} indices, got {len(indices)}")
        return QuantumHistory(
            self.pre_projector,
            self.post_projector,
            tuple(fam[i] for fam, i in zip(self.families, indices)),
            indices,
        )

    def history_label(self, indices: Sequence[int]) -> tuple[str, ...]:
        if self.labels is None:
            return tuple(str(i) for i in indices)
        return tuple(self.labels[j][i] for j, i in enumerate(indices))

    def check_evolution(self, ev: SegmentedEvolution):
        if ev.dim != self.dim or ev.k != self.k:
            raise DimensionMismatch(
                f"evolution (dim={ev.dim}, k={ev.k}) does not fit space (dim={self.dim}, k={self.k})"
            )


def _cached(obj, name, make):
    try:
        return obj.__dict__[name]
    except KeyError:
        value = make()
        object.__setattr__(obj, name, value)
        return value


def _check_size(space: HistorySpace, cap: int | None = None):
    cap = space.max_histories if cap is None else cap
    if space.size > cap:
        raise SizeOverflow(f"{space.size} histories exceed the cap of {cap}")


def enumerate_histories(space: HistorySpace) -> Iterator[QuantumHistory]:
    """All histories of ``space``, lexicographic with the last time varying fastest."""
    _check_size(space)
    return (space.history(idx) for idx in np.ndindex(*space.shape))


def chain_operator(h: QuantumHistory, ev: SegmentedEvolution) -> np.ndarray:
    if h.k != ev.k:
        raise DimensionMismatch(f"history has {h.k} intermediate times, evolution has {ev.k}")
    if h.dim != ev.dim or any(p.dim != ev.dim for p in h.slots):
        raise DimensionMismatch("history and evolution differ in dimension")
    k = h.pre.op
    for seg, p in zip(ev.segments, (*h.intermediates, h.post)):
        k = p.op @ (seg @ k)
    return k


def _history_vector(h: QuantumHistory, space: HistorySpace, ev: SegmentedEvolution) -> np.ndarray:
    v = h.pre.op @ space.pre_state
    for seg, p in zip(ev.segments, (*h.intermediates, h.post)):
        v = p.op @ (seg @ v)
    return v


def history_amplitude(h: QuantumHistory, space: HistorySpace, ev: SegmentedEvolution) -> complex:
    """<psi_f| K_h |psi_i>, by propagating the initial state through the chain."""
    space.check_evolution(ev)
    if h.k != space.k or h.dim != space.dim:
        raise DimensionMismatch("history does not belong to this space")
    return la.inner(space.post_state, _history_vector(h, space, ev))


def _unit_eigenvector(p: la.Projector) -> np.ndarray:
    if p.rank != 1:
        raise ValidationError("propagator products need rank-1 projectors")
    col = np.argmax(np.linalg.norm(p.op, axis=0))
    v = p.op[:, col]
    return v / np.linalg.norm(v)


def propagator_amplitude(h: QuantumHistory, space: HistorySpace, ev: SegmentedEvolution) -> complex:
    """Same amplitude as :func:`history_amplitude`, as a product of single-segment propagators.

    Only defined when every intermediate projector has rank 1.
    """
    space.check_evolution(ev)
    states = [space.pre_state, *(_unit_eigenvector(p) for p in h.intermediates), space.post_state]
    amp = 1.0 + 0j
    for seg, a, b in zip(ev.segments, states[:-1], states[1:]):
        amp *= la.inner(b, seg @ a)
    return amp


def history_amplitudes(space: HistorySpace, ev: SegmentedEvolution) -> np.ndarray:
    """Amplitudes of every history as an array of shape ``space.shape``.

    Built by carrying a stack of partially propagated states, one per prefix
    of index choices, so no chain operator is ever formed.
    """
    space.check_evolution(ev)
    _check_size(space)
    v = space.pre_projector.op @ space.pre_state
    for seg, fam in zip(ev.segments, space.families):
        v = v @ seg.T
        stack = np.stack([p.op for p in fam])
        v = np.einsum("aij,...j->...ai", stack, v)
    bra = space.post_state.conj() @ space.post_projector.op @ ev.segments[-1]
    return v @ bra


def transition_amplitude(space: HistorySpace, ev: SegmentedEvolution) -> complex:
    """<psi_f| T_fi |psi_i> straight from the composed evolution."""
    space.check_evolution(ev)
    return la.inner(space.post_state, ev.total() @ space.pre_state)


@dataclass(frozen=True)
class AdjacencyMap:
    """``allowed[j][a, b]``: slot-``j`` member ``a`` connects to slot-``j+1`` member ``b``.

    Slot 0 holds only the pre-selection projector, slot ``k+1`` only the
    post-selection projector.
    """

    allowed: tuple[np.ndarray, ...]

    def connected(self, path: Sequence[int]) -> bool:
        return all(bool(m[a, b]) for m, a, b in zip(self.allowed, path[:-1], path[1:]))


def build_adjacency(space: HistorySpace, ev: SegmentedEvolution, tol: float = TAU_PRUNE) -> AdjacencyMap:
    space.check_evolution(ev)
    slots = [[space.pre_projector], *(list(f) for f in space.families), [space.post_projector]]
    allowed = []
    for seg, left, right in zip(ev.segments, slots[:-1], slots[1:]):
        m = np.zeros((len(left), len(right)), dtype=bool)
        for a, pa in enumerate(left):
            t = seg @ pa.op
            for b, pb in enumerate(right):
                m[a, b] = la.max_abs(pb.op @ t) > tol
        m.setflags(write=False)
        allowed.append(m)
    return AdjacencyMap(tuple(allowed))


def is_continuous(h: QuantumHistory, adj: AdjacencyMap) -> bool:
    if h.indices is None:
        raise ValidationError("continuity needs a history built from family indices")
    if len(h.indices) + 1 != len(adj.allowed):
        raise ShapeMismatch("history and adjacency map have different lengths")
    return adj.connected((0, *h.indices, 0))


def continuous_indices(adj: AdjacencyMap) -> list[tuple[int, ...]]:
    """Index tuples of every continuous history, in lexicographic order."""
    k = len(adj.allowed) - 1
    # members that can still reach the post-selection slot
    alive = [None] * (k + 2)
    alive[k + 1] = np.ones(1, dtype=bool)
    for j in range(k, -1, -1):
        alive[j] = (adj.allowed[j] & alive[j + 1][None, :]).any(axis=1)
    out = []

    def walk(j, a, prefix):
        if j == k:
            if adj.allowed[k][a, 0]:
                out.append(prefix)
            return
        for b in np.flatnonzero(adj.allowed[j][a] & alive[j + 1]):
            walk(j + 1, int(b), prefix + (int(b),))

    if alive[0][0]:
        walk(0, 0, ())
    return out


def continuous_histories(space: HistorySpace, ev: SegmentedEvolution) -> list[QuantumHistory]:
    return [space.history(idx) for idx in continuous_indices(build_adjacency(space, ev))]


def tree_sum(values) -> complex:
    """Pairwise sum with a fixed binary-tree shape determined only by ``len(values)``."""
    x = np.asarray(values, dtype=complex).ravel()
    if x.size == 0:
        return 0j
    while x.size > 1:
        head = x[: x.size - x.size % 2]
        pairs = head[0::2] + head[1::2]
        x = np.concatenate([pairs, x[head.size:]])
    return complex(x[0])


def serial_sum(values) -> complex:
    return reduce(lambda a, b: a + b, (complex(v) for v in np.asarray(values).ravel()), 0j)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("HISTWEAK_THREADS", "1")))
    except ValueError:
        return 1


def _amplitudes_of(histories, space, ev, workers) -> np.ndarray:
    histories = list(histories)
    if workers <= 1 or len(histories) < 2 * workers:
        return np.array([history_amplitude(h, space, ev) for h in histories], dtype=complex)
    chunks = np.array_split(np.arange(len(histories)), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(
            lambda idx: [history_amplitude(histories[i], space, ev) for i in idx], chunks
        )
        return np.array([a for part in parts for a in part], dtype=complex)


def feynman_sum(
    space: HistorySpace,
    ev: SegmentedEvolution,
    pruned: bool = False,
    reduction: str = "tree",
    workers: int | None = None,
) -> complex:
    """Coherent sum of history amplitudes over the whole space.

    With ``pruned`` only continuous histories are visited. ``reduction`` is
    ``"tree"`` (fixed pairwise shape, independent of ``workers``) or
    ``"serial"`` (left-to-right in lexicographic order).
    """
    workers = default_workers() if workers is None else workers
    if pruned:
        amps = _amplitudes_of(continuous_histories(space, ev), space, ev, workers)
    else:
        amps = history_amplitudes(space, ev).ravel()
    if reduction == "tree":
        return tree_sum(amps)
    if reduction == "serial":
        return serial_sum(amps)
    raise ValueError(f"unknown reduction {reduction!r}")


def histories_orthogonal(a: QuantumHistory, b: QuantumHistory, tol: float = la.TAU_OP) -> bool:
    """Orthogonality in history space via the per-time factorisation of Tr[Qa Qb]."""
    if len(a.slots) != len(b.slots):
        raise ShapeMismatch(f"histories have {len(a.slots)} and {len(b.slots)} time slots")
    if a.dim != b.dim:
        raise ShapeMismatch("histories live in different dimensions")
    product = 1.0 + 0j
    for pa, pb in zip(a.slots, b.slots):
        product *= np.trace(pa.op @ pb.op)
    return abs(product) < tol
