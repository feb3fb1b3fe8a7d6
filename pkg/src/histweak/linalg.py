"""Dense complex linear algebra on small Hilbert spaces.

Operators and states are plain ``numpy`` arrays of dtype ``complex128``.
The wrappers here (:class:`Projector`, :class:`ProjectorFamily`,
:class:`SpectralDecomposition`) only exist to carry the fact that a matrix
has been validated; the matrices they hold are read-only copies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    Incomplete,
    IncompleteAndNotOrthogonal,
    NotHermitian,
    NotIdempotent,
    NotNormalized,
    NotOrthogonal,
    NotUnitary,
    ValidationError,
)

TAU_OP = 1e-9
TAU_NORM = 1e-9
TAU_EIG = 1e-8
MAX_DIM = 4096


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def as_operator(a) -> np.ndarray:
    """Return a read-only square complex matrix, rejecting anything else."""
    op = np.asarray(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {op.shape}")
    if op.shape[0] > MAX_DIM:
        raise DimensionMismatch(f"dimension {op.shape[0]} exceeds cap {MAX_DIM}")
    if not np.all(np.isfinite(op)):
        raise ValidationError("operator has non-finite entries")
    return _frozen(op)


def as_state(v, normalized: bool = True) -> np.ndarray:
    """Return a read-only complex vector; check unit norm when ``normalized``."""
    psi = np.asarray(v, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise DimensionMismatch(f"state must be a non-empty vector, got shape {psi.shape}")
    if psi.size > MAX_DIM:
        raise DimensionMismatch(f"dimension {psi.size} exceeds cap {MAX_DIM}")
    if not np.all(np.isfinite(psi)):
        raise ValidationError("state has non-finite entries")
    if normalized:
        dev = abs(np.linalg.norm(psi) - 1.0)
        if dev > TAU_NORM:
            raise NotNormalized(f"state norm deviates from 1 by {dev:.3e}", dev)
    return _frozen(psi)


def normalize(v) -> np.ndarray:
    psi = np.asarray(v, dtype=complex)
    return _frozen(psi / np.linalg.norm(psi))


def ket_bra(ket, bra=None) -> np.ndarray:
    """|ket><bra|; with one argument the rank-1 projector onto ``ket``."""
    ket = np.asarray(ket, dtype=complex)
    bra = ket if bra is None else np.asarray(bra, dtype=complex)
    return np.outer(ket, bra.conj())


def basis(n: int, i: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[i] = 1.0
    return e


def dagger(a) -> np.ndarray:
    return np.conj(np.asarray(a)).T


@dataclass(frozen=True, eq=False)
class Projector:
    op: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def __repr__(self):
        return f"Projector(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class ProjectorFamily:
    members: tuple[Projector, ...]

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i) -> Projector:
        return self.members[i]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    pairs: tuple[tuple[float, Projector], ...]

    @property
    def eigenvalues(self) -> tuple[float, ...]:
        return tuple(lam for lam, _ in self.pairs)

    @property
    def projectors(self) -> tuple[Projector, ...]:
        return tuple(p for _, p in self.pairs)

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p.op for lam, p in self.pairs)


def hermitian_deviation(a) -> float:
    a = np.asarray(a)
    return max_abs(a - dagger(a))


def check_hermitian(a, tol: float = TAU_OP) -> np.ndarray:
    op = as_operator(a)
    dev = hermitian_deviation(op)
    if dev >= tol:
        raise NotHermitian(f"operator is not Hermitian (max deviation {dev:.3e})", dev)
    return op


def validate_projector(a, tol: float = TAU_OP) -> Projector:
    op = as_operator(a)
    dev = hermitian_deviation(op)
    if dev >= tol:
        raise NotHermitian(f"projector is not Hermitian (max deviation {dev:.3e})", dev)
    dev = max_abs(op @ op - op)
    if dev >= tol:
        raise NotIdempotent(f"projector is not idempotent (max deviation {dev:.3e})", dev)
    return Projector(op, int(round(np.trace(op).real)))


def projector_onto(vectors) -> Projector:
    """Projector onto the span of the given orthonormal column vectors (or one vector)."""
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    return validate_projector(v @ dagger(v))


def validate_family(projectors: Iterable, tol: float = TAU_OP) -> ProjectorFamily:
    members = tuple(p if isinstance(p, Projector) else validate_projector(p, tol) for p in projectors)
    if not members:
        raise ValidationError("projector family is empty")
    dims = {p.dim for p in members}
    if len(dims) != 1:
        raise DimensionMismatch(f"family members have mixed dimensions {sorted(dims)}")
    n = members[0].dim

    overlap = 0.0
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            overlap = max(overlap, max_abs(members[a].op @ members[b].op))
    gap = max_abs(sum(p.op for p in members) - np.eye(n))

    if overlap >= tol and gap >= tol:
        raise IncompleteAndNotOrthogonal(
            f"family is not orthogonal (max |PaPb| {overlap:.3e}) and incomplete "
            f"(max |sum - I| {gap:.3e})",
            max(overlap, gap),
        )
    if overlap >= tol:
        raise NotOrthogonal(f"family is not orthogonal (max |PaPb| {overlap:.3e})", overlap)
    if gap >= tol:
        raise Incomplete(f"family does not sum to identity (max |sum - I| {gap:.3e})", gap)
    return ProjectorFamily(members)


def basis_family(n: int) -> ProjectorFamily:
    return validate_family(projector_onto(basis(n, i)) for i in range(n))


def family_from_unitary(u, groups: Sequence[Sequence[int]] | None = None) -> ProjectorFamily:
    """Complete family whose members project onto groups of the columns of ``u``."""
    u = np.asarray(u, dtype=complex)
    if groups is None:
        groups = [[i] for i in range(u.shape[1])]
    return validate_family(projector_onto(u[:, list(g)]) for g in groups)


def spectral_decompose(a, tol: float = TAU_OP, merge_tol: float = TAU_EIG) -> SpectralDecomposition:
    """Eigen-decompose a Hermitian operator, one projector per distinct eigenvalue.

    Pairs are ordered by decreasing eigenvalue. Eigenvalues closer than
    ``merge_tol`` (chained) are merged and represented by their mean.
    """
    op = check_hermitian(a, tol)
    herm = 0.5 * (op + dagger(op))
    w, v = np.linalg.eigh(herm)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]

    clusters = [[0]]
    for i in range(1, len(w)):
        if abs(w[clusters[-1][-1]] - w[i]) <= merge_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    pairs = []
    for c in clusters:
        vecs = v[:, c]
        pairs.append((float(np.mean(w[c])), Projector(_frozen(vecs @ dagger(vecs)), len(c))))
    return SpectralDecomposition(tuple(pairs))


def validate_unitary(u, tol: float = TAU_OP) -> np.ndarray:
    op = as_operator(u)
    dev = max_abs(dagger(op) @ op - np.eye(op.shape[0]))
    if dev >= tol:
        raise NotUnitary(f"operator is not unitary (max |U^dag U - I| {dev:.3e})", dev)
    return op


def inner(bra, ket) -> complex:
    """<bra|ket>."""
    return complex(np.vdot(bra, ket))
