"""Randomised property suites behind ``histweak check``."""
from __future__ import annotations

from .errors import ValidationError
from .histories import feynman_sum, history_amplitude, transition_amplitude
from .randomized import random_hermitian, random_history_space, rng_from
from .weakvalues import (
    born_probability,
    general_swv,
    history_ops,
    refine_swv,
    sequential_weak_value,
    swv_as_amplitude_ratio,
    swv_complete_sum,
)

TOLERANCES = {
    "unity": 1e-9,
    "ratio": 1e-10,
    "coarse": 1e-10,
    "continuity": 1e-9,
    "born": 1e-12,
    "gswv": 1e-9,
}


def _random_history(space, rng):
    return space.history([int(rng.integers(len(f))) for f in space.families])


def unity(n, k, rng):
    space, ev = random_history_space(n, k, rng)
    yield "sum of sequential weak values - 1", abs(swv_complete_sum(space, ev) - 1)


def ratio(n, k, rng):
    space, ev = random_history_space(n, k, rng)
    h = _random_history(space, rng)
    swv = sequential_weak_value(history_ops(h), space.pre_state, space.post_state, ev).value
    yield "sequential weak value - amplitude ratio", abs(swv - swv_as_amplitude_ratio(h, space, ev).value)


def coarse(n, k, rng):
    space, ev = random_history_space(n, k, rng)
    ops = history_ops(_random_history(space, rng))
    for slot in range(1, k + 1):
        rest = [(t, p) for t, p in ops if t != slot]
        ref = refine_swv(rest, slot, space.families[slot - 1], space.pre_state, space.post_state, ev)
        yield f"refinement at t_{slot}", abs(ref.total - ref.coarse.value)


def continuity(n, k, rng):
    space, ev = random_history_space(n, k, rng, sparse=True)
    full = feynman_sum(space, ev)
    yield "pruned - full Feynman sum", abs(feynman_sum(space, ev, pruned=True) - full)
    yield "Feynman sum - direct evolution", abs(full - transition_amplitude(space, ev))


def born(n, k, rng):
    space, ev = random_history_space(n, k, rng)
    h = _random_history(space, rng)
    yield "Born probability - |amplitude|^2", abs(born_probability(h, space, ev) - abs(history_amplitude(h, space, ev)) ** 2)


def gswv(n, k, rng):
    space, ev = random_history_space(n, k, rng)
    obs = [(t, random_hermitian(n, rng)) for t in range(1, k + 1)]
    res = general_swv(obs, space.pre_state, space.post_state, ev)
    yield "direct - spectral route", abs(res.direct.value - res.spectral_value)


SUITES = {f.__name__: f for f in (unity, ratio, coarse, continuity, born, gswv)}


def run_suite(name: str, n: int, k: int, seed: int, trials: int):
    """Yield ``(trial, check name, deviation, tolerance)`` for every check of every trial."""
    if n < 1 or k < 0 or trials < 1:
        raise ValidationError("need dim >= 1, k >= 0 and trials >= 1")
    suite = SUITES[name]
    tol = TOLERANCES[name]
    rng = rng_from(seed)
    for trial in range(trials):
        for label, dev in suite(n, k, rng):
            yield trial, label, float(dev), tol
