"""Single-time and sequential weak values and the identities linking them to histories."""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import (
    DimensionMismatch,
    NonIncreasingTimes,
    ProbabilityOutOfRange,
    ValidationError,
    ZeroDenominator,
)
from .histories import (
    HistorySpace,
    QuantumHistory,
    SegmentedEvolution,
    enumerate_histories,
    feynman_sum,
    histories_orthogonal,
    history_amplitude,
    history_amplitudes,
    tree_sum,
)

TAU_DEN = 1e-8
MAX_SPECTRAL_TERMS = 10**6


@dataclass(frozen=True)
class WeakValueResult:
    value: complex | None
    numerator: complex
    denominator: complex
    conditioning: float

    @property
    def conditioned(self) -> bool:
        return self.value is not None


def _result(numerator: complex, denominator: complex, scale: float, what: str) -> WeakValueResult:
    conditioning = abs(denominator) / scale if scale > 0 else 0.0
    if conditioning <= TAU_DEN:
        res = WeakValueResult(None, complex(numerator), complex(denominator), conditioning)
        raise ZeroDenominator(
            f"{what}: post-selection amplitude {abs(denominator):.3e} is below threshold", res
        )
    return WeakValueResult(complex(numerator / denominator), complex(numerator), complex(denominator), conditioning)


def _states(pre, post, ev: SegmentedEvolution):
    pre = la.as_state(pre, normalized=False)
    post = la.as_state(post, normalized=False)
    if pre.size != ev.dim or post.size != ev.dim:
        raise DimensionMismatch("states and evolution differ in dimension")
    return pre, post


def _sequence_amplitude(ops: Sequence[tuple[int, np.ndarray]], pre, post, ev) -> complex:
    """<post| T_{f,t_k} A_k ... A_1 T_{t_1,i} |pre> for operators at strictly increasing times."""
    v = pre
    now = 0
    for t, a in ops:
        v = a @ (ev.propagator(now, t) @ v)
        now = t
    v = ev.propagator(now, ev.k + 1) @ v
    return la.inner(post, v)


def _normalize_ops(ops, ev: SegmentedEvolution):
    out = []
    last = -1
    for t, a in ops:
        t = int(t)
        if not 0 <= t <= ev.k + 1:
            raise ValidationError(f"time index {t} outside 0..{ev.k + 1}")
        if t <= last:
            raise NonIncreasingTimes(f"time {t} does not follow time {last}")
        op = la.as_operator(a.op if isinstance(a, la.Projector) else a)
        if op.shape[0] != ev.dim:
            raise DimensionMismatch(f"operator at time {t} has dimension {op.shape[0]}, expected {ev.dim}")
        out.append((t, op))
        last = t
    return out


def sequential_weak_value(ops, pre, post, ev: SegmentedEvolution) -> WeakValueResult:
    """Weak value of operators inserted at strictly increasing times.

    ``ops`` is a sequence of ``(time_index, operator)`` pairs ordered from
    earliest to latest. An empty sequence gives 1.
    """
    ops = _normalize_ops(ops, ev)
    pre, post = _states(pre, post, ev)
    den = la.inner(post, ev.total() @ pre)
    num = _sequence_amplitude(ops, pre, post, ev) if ops else den
    scale = float(np.linalg.norm(pre) * np.linalg.norm(post))
    return _result(num, den, scale, "sequential weak value")


def weak_value(a, pre, post, ev: SegmentedEvolution, at: int) -> WeakValueResult:
    return sequential_weak_value([(at, a)], pre, post, ev)


def history_ops(h: QuantumHistory) -> list[tuple[int, la.Projector]]:
    return [(j + 1, p) for j, p in enumerate(h.intermediates)]


def swv_as_amplitude_ratio(
    h: QuantumHistory, space: HistorySpace, ev: SegmentedEvolution, total: complex | None = None
) -> WeakValueResult:
    """History amplitude divided by the Feynman sum of the whole space."""
    num = history_amplitude(h, space, ev)
    den = feynman_sum(space, ev) if total is None else total
    return _result(num, den, 1.0, "amplitude ratio")


def swv_complete_sum(space: HistorySpace, ev: SegmentedEvolution) -> complex:
    """Sum of the sequential weak values of every history in a complete space.

    Each term is a history amplitude over the directly evolved transition
    amplitude, so the unit result is a genuine check of completeness.
    """
    res = sequential_weak_value([], space.pre_state, space.post_state, ev)
    return tree_sum(history_amplitudes(space, ev).ravel() / res.denominator)


@dataclass(frozen=True)
class Refinement:
    coarse: WeakValueResult
    parts: tuple[WeakValueResult, ...]
    total: complex


def refine_swv(ops, slot: int, family, pre, post, ev: SegmentedEvolution) -> Refinement:
    """Split a coarse sequential weak value over a complete family inserted at ``slot``."""
    family = family if isinstance(family, la.ProjectorFamily) else la.validate_family(family)
    ops = list(ops)
    if any(int(t) == slot for t, _ in ops):
        raise ValidationError(f"time {slot} is already occupied")
    coarse = sequential_weak_value(ops, pre, post, ev)
    parts = []
    for p in family:
        fine = sorted([*ops, (slot, p)], key=lambda item: int(item[0]))
        parts.append(sequential_weak_value(fine, pre, post, ev))
    return Refinement(coarse, tuple(parts), sum((r.value for r in parts), 0j))


@dataclass(frozen=True)
class SpectralTerm:
    eigenvalues: tuple[float, ...]
    weight: float
    swv: complex


@dataclass(frozen=True)
class GeneralSWV:
    direct: WeakValueResult
    spectral_value: complex | None
    terms: tuple[SpectralTerm, ...]


def general_swv(observables, pre, post, ev: SegmentedEvolution, max_terms: int = MAX_SPECTRAL_TERMS) -> GeneralSWV:
    """Sequential weak value of Hermitian observables, directly and through their spectra.

    The spectral route expands every observable into eigenprojectors and
    sums eigenvalue-weighted projector weak values; it is skipped (``None``)
    when the number of eigen-tuples exceeds ``max_terms``.
    """
    observables = [(int(t), la.check_hermitian(a)) for t, a in observables]
    direct = sequential_weak_value(observables, pre, post, ev)
    decomps = [la.spectral_decompose(a) for _, a in observables]
    count = math.prod(len(d.pairs) for d in decomps)
    if count > max_terms:
        return GeneralSWV(direct, None, ())
    times = [t for t, _ in observables]
    terms = []
    for combo in itertools.product(*(d.pairs for d in decomps)):
        lams = tuple(lam for lam, _ in combo)
        swv = sequential_weak_value(list(zip(times, (p for _, p in combo))), pre, post, ev)
        terms.append(SpectralTerm(lams, math.prod(lams), swv.value))
    spectral = sum((t.weight * t.swv for t in terms), 0j)
    return GeneralSWV(direct, spectral, tuple(terms))


def born_probability(h: QuantumHistory, space: HistorySpace, ev: SegmentedEvolution) -> float:
    """Probability of the history under strong measurements: |swv * <psi_f|T_fi|psi_i>|^2."""
    res = sequential_weak_value(history_ops(h), space.pre_state, space.post_state, ev)
    return abs(res.value * res.denominator) ** 2


@dataclass(frozen=True)
class AmplitudeRecovery:
    swv: complex
    probability: float
    phase: float
    amplitude: complex


def amplitude_from_swv(swv: complex, p: float, theta: float) -> AmplitudeRecovery:
    if not 0.0 <= p <= 1.0:
        raise ProbabilityOutOfRange(f"probability {p} outside [0, 1]", p)
    amp = complex(swv) * math.sqrt(p) * cmath.exp(1j * theta)
    return AmplitudeRecovery(complex(swv), float(p), float(theta), amp)


def principal_phase(z: complex) -> float:
    """Argument in (-pi, pi]."""
    theta = cmath.phase(z)
    return math.pi if theta == -math.pi else theta


@dataclass(frozen=True)
class IncompatibilityReport:
    is_orthogonal_to_all: bool
    coherent_sum: float
    incoherent_sum: float
    extra_amplitude: complex
    total_amplitude: complex


def incompatibility_diagnostic(extra: QuantumHistory, space: HistorySpace, ev: SegmentedEvolution) -> IncompatibilityReport:
    """Effect of adding ``extra`` to the complete set of histories of ``space``."""
    amps = history_amplitudes(space, ev).ravel()
    total = tree_sum(amps)
    if abs(total) <= TAU_DEN:
        raise ZeroDenominator("Feynman sum vanishes")
    psi = history_amplitude(extra, space, ev)
    coherent = abs(psi / total + 1.0) ** 2
    incoherent = abs(psi) ** 2 / float(np.sum(np.abs(amps) ** 2)) + 1.0
    orthogonal = all(histories_orthogonal(extra, h) for h in enumerate_histories(space))
    return IncompatibilityReport(orthogonal, coherent, incoherent, psi, total)
