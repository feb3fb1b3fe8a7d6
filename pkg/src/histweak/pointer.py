"""Exact simulation of weak measurements with Gaussian pointers.

The system and up to two pointers are held as one dense array of shape
``(n, M)`` or ``(n, M, M)``. An impulsive coupling ``exp(-i g A (x) p)`` is
applied exactly: each eigenspace of ``A`` translates its pointer component
by ``g * eigenvalue``, implemented as a phase ramp in wave-number space.
Units have hbar = 1, so the pointer momentum is its wave number.

Pointer amplitudes inside :class:`JointState` and :class:`MeterState` are
normalised as discrete vectors (sum of squared moduli is 1); the
continuum wavefunction is ``amplitudes / sqrt(dx ** meters)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import GridTooCoarse, NonIncreasingTimes, PostSelectionImpossible, ValidationError
from .histories import SegmentedEvolution
from .weakvalues import sequential_weak_value

POSTSELECT_FLOOR = 1e-300


@dataclass(frozen=True)
class GaussianMeter:
    """Pointer grid: ``grid_points`` samples on ``[-half_width, half_width)``.

    ``sigma`` is the standard deviation of the position density. The half
    width defaults to ``16 * sigma``.
    """

    sigma: float = 1.0
    grid_points: int = 1024
    half_width: float | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if self.half_width is None:
            object.__setattr__(self, "half_width", 16.0 * self.sigma)
        m = self.grid_points
        if m < 256 or m & (m - 1):
            raise ValidationError(f"grid_points must be a power of two >= 256, got {m}")
        if self.half_width < 8 * self.sigma:
            raise ValidationError(f"half_width {self.half_width} is below 8 sigma")
        if self.sigma / self.dx < 8:
            raise GridTooCoarse(f"sigma spans only {self.sigma / self.dx:.2f} grid cells (need 8)")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.grid_points

    @property
    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.grid_points)

    @property
    def k(self) -> np.ndarray:
        """Wave numbers in ``numpy.fft`` order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.grid_points, d=self.dx)


def initial_meter(m: GaussianMeter) -> np.ndarray:
    """Real Gaussian pointer wavefunction centred at zero, sampled on the grid."""
    s = m.sigma
    return (2.0 * np.pi * s * s) ** -0.25 * np.exp(-m.x**2 / (4.0 * s * s)) + 0j


@dataclass(frozen=True, eq=False)
class JointState:
    amplitudes: np.ndarray
    meter: GaussianMeter

    @property
    def system_dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def meter_count(self) -> int:
        return self.amplitudes.ndim - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def joint_initial(pre, meter: GaussianMeter, meter_count: int = 1) -> JointState:
    if meter_count not in (1, 2):
        raise ValidationError("one or two pointers are supported")
    psi = la.as_state(pre)
    phi = initial_meter(meter) * math.sqrt(meter.dx)
    amps = psi
    for _ in range(meter_count):
        amps = np.multiply.outer(amps, phi)
    return JointState(amps, meter)


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    g: float
    observable: np.ndarray
    meter_index: int = 0
    at: int = 1

    def __post_init__(self):
        if self.g < 0:
            raise ValidationError("coupling strength must be non-negative")
        object.__setattr__(self, "observable", la.check_hermitian(self.observable))


def apply_system(js: JointState, u) -> JointState:
    u = np.asarray(u, dtype=complex)
    return JointState(np.tensordot(u, js.amplitudes, axes=(1, 0)), js.meter)


def evolve_impulsive(js: JointState, c: CouplingSpec) -> JointState:
    """Apply ``exp(-i g A (x) p)`` to pointer ``c.meter_index`` exactly."""
    if not 0 <= c.meter_index < js.meter_count:
        raise ValidationError(f"no pointer {c.meter_index} in a {js.meter_count}-pointer state")
    if c.observable.shape[0] != js.system_dim:
        raise ValidationError("observable dimension does not match the system")
    if c.g == 0:
        return js
    dec = la.spectral_decompose(c.observable)
    shift = c.g * max(abs(lam) for lam in dec.eigenvalues)
    if shift > js.meter.half_width / 4:
        raise ValidationError(f"pointer shift {shift} exceeds a quarter of the half width")

    axis = 1 + c.meter_index
    spectrum = np.fft.fft(js.amplitudes, axis=axis)
    bshape = [1] * spectrum.ndim
    bshape[axis] = -1
    k = js.meter.k.reshape(bshape)
    out = np.zeros_like(spectrum)
    for lam, p in dec.pairs:
        out += np.tensordot(p.op, spectrum, axes=(1, 0)) * np.exp(-1j * c.g * lam * k)
    return JointState(np.fft.ifft(out, axis=axis), js.meter)


@dataclass(frozen=True, eq=False)
class MeterState:
    amplitudes: np.ndarray
    meter: GaussianMeter

    @property
    def meter_count(self) -> int:
        return self.amplitudes.ndim

    def wavefunction(self) -> np.ndarray:
        return self.amplitudes / math.sqrt(self.meter.dx**self.meter_count)


def postselect(js: JointState, post) -> tuple[MeterState, float]:
    post = la.as_state(post)
    if post.size != js.system_dim:
        raise ValidationError("post-selected state dimension does not match the system")
    meters = np.tensordot(post.conj(), js.amplitudes, axes=(0, 0))
    prob = float(np.sum(np.abs(meters) ** 2))
    if prob < POSTSELECT_FLOOR:
        raise PostSelectionImpossible(f"post-selection probability {prob:.3e}")
    return MeterState(meters / math.sqrt(prob), js.meter), prob


def simulate(pre, post, ev: SegmentedEvolution, couplings: Sequence[CouplingSpec], meter: GaussianMeter) -> tuple[MeterState, float]:
    """Evolve system plus pointers through the segments, couple at the given times, post-select."""
    couplings = list(couplings)
    times = [c.at for c in couplings]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise NonIncreasingTimes(f"coupling times {times} are not strictly increasing")
    meters = 1 + max((c.meter_index for c in couplings), default=0)
    js = joint_initial(pre, meter, meters)
    now = 0
    for c in couplings:
        if not 0 <= c.at <= ev.k + 1:
            raise ValidationError(f"coupling time {c.at} outside 0..{ev.k + 1}")
        js = apply_system(js, ev.propagator(now, c.at))
        js = evolve_impulsive(js, c)
        now = c.at
    js = apply_system(js, ev.propagator(now, ev.k + 1))
    return postselect(js, post)


@dataclass(frozen=True)
class MeterMoments:
    mean_x: tuple[float, ...]
    mean_k: tuple[float, ...]
    xx: float | None = None
    kk: float | None = None
    xk: float | None = None
    kx: float | None = None


def _fft(a, axes):
    for ax in axes:
        a = np.fft.fft(a, axis=ax, norm="ortho")
    return a


def meter_moments(state: MeterState) -> MeterMoments:
    """Raw first moments and cross-correlators by quadrature on the grid."""
    a = state.amplitudes
    x, k = state.meter.x, state.meter.k
    px = np.abs(a) ** 2
    px = px / px.sum()
    if state.meter_count == 1:
        pk = np.abs(_fft(a, [0])) ** 2
        pk = pk / pk.sum()
        return MeterMoments((float(x @ px),), (float(k @ pk),))

    pkk = np.abs(_fft(a, [0, 1])) ** 2
    pxk = np.abs(_fft(a, [1])) ** 2
    pkx = np.abs(_fft(a, [0])) ** 2
    pkk, pxk, pkx = (p / p.sum() for p in (pkk, pxk, pkx))
    return MeterMoments(
        mean_x=(float(x @ px.sum(axis=1)), float(x @ px.sum(axis=0))),
        mean_k=(float(k @ pkk.sum(axis=1)), float(k @ pkk.sum(axis=0))),
        xx=float(x @ px @ x),
        kk=float(k @ pkk @ k),
        xk=float(x @ pxk @ k),
        kx=float(k @ pkx @ x),
    )


def extract_single_wv(moments: MeterMoments, g: float, sigma: float, meter_index: int = 0) -> complex:
    if not g > 0:
        raise ValidationError("g must be positive")
    return complex(moments.mean_x[meter_index] / g, 2.0 * sigma**2 * moments.mean_k[meter_index] / g)


@dataclass(frozen=True)
class SequentialEstimate:
    correlator: complex
    subtraction: complex
    per_equation: dict


def extract_sequential_wv(moments: MeterMoments, single_wvs: tuple[complex, complex], g: float, sigma: float) -> SequentialEstimate:
    """Two-time weak value from pointer correlators.

    ``correlator`` combines the xx/kk and xk/kx correlators so the
    single-time products cancel. ``subtraction`` instead removes those
    products using the supplied single-time weak values, taking the real
    part from ``xx`` and the imaginary part from ``xk``.
    """
    if not g > 0:
        raise ValidationError("g must be positive")
    if moments.xx is None:
        raise ValidationError("sequential extraction needs two pointers")
    a1, a2 = (complex(w) for w in single_wvs)
    s2, g2 = sigma**2, g * g
    cross = a1.conjugate() * a2
    correlator = complex((moments.xx - 4 * s2 * s2 * moments.kk) / g2, 2 * s2 * (moments.xk + moments.kx) / g2)
    per_eq = {
        "xx": 2 * moments.xx / g2 - cross.real,
        "kk": -8 * s2 * s2 * moments.kk / g2 + cross.real,
        "xk": 4 * s2 * moments.xk / g2 - cross.imag,
        "kx": 4 * s2 * moments.kx / g2 + cross.imag,
    }
    return SequentialEstimate(correlator, complex(per_eq["xx"], per_eq["xk"]), per_eq)


def correlator_predictions(a1w: complex, a2w: complex, a21w: complex, g: float, sigma: float) -> dict:
    """Leading-order two-pointer correlators for the given weak values."""
    cross = complex(a1w).conjugate() * complex(a2w)
    s2 = sigma**2
    return {
        "xx": g * g / 2 * (complex(a21w) + cross).real,
        "kk": g * g / (8 * s2 * s2) * (-complex(a21w) + cross).real,
        "xk": g * g / (4 * s2) * (complex(a21w) - cross.conjugate()).imag,
        "kx": g * g / (4 * s2) * (complex(a21w) + cross.conjugate()).imag,
    }


@dataclass(frozen=True, eq=False)
class PointerInstance:
    """Pre/post states, evolution and one or two observables with their coupling times."""

    pre: np.ndarray
    post: np.ndarray
    evolution: SegmentedEvolution
    observables: tuple[tuple[int, np.ndarray], ...]

    def __post_init__(self):
        object.__setattr__(self, "pre", la.as_state(self.pre))
        object.__setattr__(self, "post", la.as_state(self.post))
        obs = tuple((int(t), la.check_hermitian(a)) for t, a in self.observables)
        if not 1 <= len(obs) <= 2:
            raise ValidationError("one or two observables are supported")
        object.__setattr__(self, "observables", obs)

    @property
    def sequential(self) -> bool:
        return len(self.observables) == 2

    def single_weak_values(self) -> tuple[complex, ...]:
        return tuple(
            sequential_weak_value([(t, a)], self.pre, self.post, self.evolution).value
            for t, a in self.observables
        )

    def sequential_weak_value(self) -> complex:
        return sequential_weak_value(self.observables, self.pre, self.post, self.evolution).value

    def couplings(self, g: float) -> list[CouplingSpec]:
        return [CouplingSpec(g, a, i, t) for i, (t, a) in enumerate(self.observables)]

    def run(self, g: float, meter: GaussianMeter) -> tuple[MeterMoments, float]:
        state, prob = simulate(self.pre, self.post, self.evolution, self.couplings(g), meter)
        return meter_moments(state), prob


@dataclass(frozen=True)
class ScalingRow:
    g: float
    estimate: complex
    error: float
    residual: float


@dataclass(frozen=True)
class ScalingStudy:
    target: complex
    rows: tuple[ScalingRow, ...]
    slope: float | None
    kind: str


def _slope(gs, residuals, floor=1e-13):
    residuals = np.asarray(residuals)
    if np.any(residuals <= floor):
        return None
    return float(np.polyfit(np.log(gs), np.log(residuals), 1)[0])


def scaling_study(instance: PointerInstance, g_values: Sequence[float], meter: GaussianMeter) -> ScalingStudy:
    """Estimation error against coupling strength.

    Single-time instances report the raw position-shift residual
    ``|<x> - g Re A_w|`` and its log-log slope. Two-time instances report
    ``<x1 x2> / g^2`` against its leading-order value; the slope there is
    the fitted power of ``<x1 x2>`` itself.
    """
    gs = [float(g) for g in g_values]
    if not gs or any(not 0 < g <= 0.3 for g in gs):
        raise ValidationError("g values must lie in (0, 0.3]")
    if any(b >= a for a, b in zip(gs, gs[1:])):
        raise ValidationError("g values must be strictly descending")
    rows = []
    if not instance.sequential:
        target = instance.single_weak_values()[0]
        for g in gs:
            mom, _ = instance.run(g, meter)
            est = extract_single_wv(mom, g, meter.sigma)
            rows.append(ScalingRow(g, est, abs(est - target), abs(mom.mean_x[0] - g * target.real)))
        return ScalingStudy(target, tuple(rows), _slope(gs, [r.residual for r in rows]), "single")

    a1, a2 = instance.single_weak_values()
    a21 = instance.sequential_weak_value()
    lead = correlator_predictions(a1, a2, a21, 1.0, meter.sigma)["xx"]
    xx = []
    for g in gs:
        mom, _ = instance.run(g, meter)
        est = extract_sequential_wv(mom, (a1, a2), g, meter.sigma)
        xx.append(mom.xx)
        rows.append(ScalingRow(g, est.correlator, abs(est.correlator - a21), abs(mom.xx / (g * g) - lead)))
    return ScalingStudy(complex(lead), tuple(rows), _slope(gs, np.abs(xx)), "sequential")
