"""Command-line interface: ``histweak <command> ...``.

Reports go to standard output as JSON (default) or CSV. Exit status is 0 on
success, 1 when a computation fails or a check does not pass, and 2 on
usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from . import linalg as la
from .checks import SUITES, run_suite
from .errors import HistweakError
from .histories import (
    SegmentedEvolution,
    build_adjacency,
    continuous_indices,
    feynman_sum,
    history_amplitudes,
    transition_amplitude,
    tree_sum,
)
from .netparse import build_model, fig1_builtin, load
from .pointer import (
    GaussianMeter,
    PointerInstance,
    correlator_predictions,
    extract_sequential_wv,
    extract_single_wv,
    scaling_study,
)
from .randomized import random_pointer_instance, rng_from
from .report import Report
from .weakvalues import TAU_DEN, sequential_weak_value, swv_complete_sum


def _labels(text: str) -> list[str]:
    out = [t.strip() for t in text.split(",") if t.strip()]
    if not out:
        raise argparse.ArgumentTypeError("expected comma-separated node labels")
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _network_report(model, args, report: Report):
    space, ev = model.space, model.evolution
    amps = history_amplitudes(space, ev)
    total = tree_sum(amps)

    def history_route(slots):
        idx = [slice(None)] * space.k
        for t, node in slots:
            idx[t - 1] = node
        return tree_sum(amps[tuple(idx)]) / total

    def resolve(labels):
        picked = []
        for lab in labels:
            t, p = model.resolve(lab)
            picked.append((t, p, model.node_index(t, lab.partition("@")[0])))
        return sorted(picked, key=lambda item: item[0])

    if args.weak:
        for lab in args.weak:
            (t, p, node), = resolve([lab])
            res = sequential_weak_value([(t, p)], space.pre_state, space.post_state, ev)
            report.add(f"({lab})_w", res.value)
            report.check(f"({lab})_w via history sum", abs(res.value - history_route([(t, node)])), 1e-9)
    elif args.seq:
        for group in args.seq:
            picked = resolve(group)
            res = sequential_weak_value([(t, p) for t, p, _ in picked], space.pre_state, space.post_state, ev)
            name = "(" + ",".join(model.label(t, model.slot_labels[t][n]) for t, _, n in reversed(picked)) + ")_w"
            report.add(name, res.value)
            report.check(f"{name} via history sum", abs(res.value - history_route([(t, n) for t, _, n in picked])), 1e-9)
    elif args.histories:
        cont = continuous_indices(build_adjacency(space, ev))
        defined = abs(total) > TAU_DEN
        report.add("histories_total", space.size)
        report.add("histories_continuous", len(cont))
        for idx in cont:
            path = ",".join(space.history_label(idx))
            report.add(f"psi[{path}]", complex(amps[idx]))
            # weak values are undefined when the post-selection amplitude vanishes
            report.add(f"swv[{path}]", complex(amps[idx] / total) if defined else None)
    else:
        direct = transition_amplitude(space, ev)
        pruned = feynman_sum(space, ev, pruned=True)
        report.add("feynman_sum", total)
        report.add("feynman_sum_pruned", pruned)
        report.add("transition_amplitude", direct)
        report.add("swv_complete_sum", swv_complete_sum(space, ev) if abs(direct) > TAU_DEN else None)
        report.check("full sum - direct", abs(total - direct), 1e-9)
        report.check("pruned sum - full sum", abs(pruned - total), 1e-9)


def cmd_fig1(args) -> Report:
    report = Report("fig1", {"bn": args.bn})
    _network_report(build_model(fig1_builtin(args.bn)), args, report)
    return report


def cmd_net(args) -> Report:
    spec = load(args.file)
    report = Report("net", {"file": args.file, "bn": spec.bn})
    _network_report(build_model(spec), args, report)
    return report


def cmd_check(args) -> Report:
    report = Report("check", {"suite": args.suite, "dim": args.dim, "k": args.k, "seed": args.seed, "trials": args.trials})
    worst = 0.0
    for trial, label, dev, tol in run_suite(args.suite, args.dim, args.k, args.seed, args.trials):
        report.check(f"trial {trial}: {label}", dev, tol)
        worst = max(worst, dev)
    report.add("max_deviation", worst)
    return report


def _complex(v) -> complex:
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, (list, tuple)):
        return complex(*v)
    return complex(v)


def _matrix(rows) -> np.ndarray:
    return np.array([[_complex(v) for v in row] for row in rows], dtype=complex)


def load_instance(path) -> PointerInstance:
    """Pointer instance from JSON: ``pre``, ``post``, ``observables`` and optional ``segments``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    pre = np.array([_complex(v) for v in data["pre"]])
    post = np.array([_complex(v) for v in data["post"]])
    obs = [(int(o["time"]), _matrix(o["matrix"])) for o in data["observables"]]
    if "segments" in data:
        ev = SegmentedEvolution([_matrix(m) for m in data["segments"]])
    else:
        ev = SegmentedEvolution.identity(pre.size, max(t for t, _ in obs))
    return PointerInstance(pre, post, ev, tuple(obs))


def builtin_instance(sequential: bool) -> PointerInstance:
    """|0> to (|0> + e^{i pi/3}|1>)/sqrt2 with sigma_x (then sigma_z), no free evolution."""
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    pre = la.basis(2, 0)
    post = np.array([1.0, np.exp(1j * np.pi / 3)]) / np.sqrt(2)
    obs = ((1, x), (2, z)) if sequential else ((1, x),)
    return PointerInstance(pre, post, SegmentedEvolution.identity(2, len(obs)), obs)


def cmd_pointer(args) -> Report:
    meter = GaussianMeter(args.sigma, args.grid, args.halfwidth)
    if args.instance:
        inst = load_instance(args.instance)
        source = args.instance
    elif args.seed is not None:
        inst = random_pointer_instance(rng_from(args.seed), sequential=args.sequential)
        source = f"random(seed={args.seed})"
    else:
        inst = builtin_instance(args.sequential)
        source = "builtin"
    if inst.sequential != args.sequential:
        raise HistweakError("instance observable count does not match --single/--sequential")
    report = Report(
        "pointer",
        {"mode": "sequential" if args.sequential else "single", "g": args.g, "sigma": meter.sigma,
         "grid": meter.grid_points, "halfwidth": meter.half_width, "instance": source, "seed": args.seed},
    )
    singles = inst.single_weak_values()
    mom, prob = inst.run(args.g, meter)
    report.add("postselection_probability", prob)
    if not args.sequential:
        target = singles[0]
        est = extract_single_wv(mom, args.g, meter.sigma)
        report.add("weak_value", target)
        report.add("estimate", est)
        report.add("mean_x", mom.mean_x[0])
        report.add("mean_k", mom.mean_k[0])
        report.check("|estimate - weak value| < 10 g^2", abs(est - target), 10 * args.g**2)
    else:
        target = inst.sequential_weak_value()
        est = extract_sequential_wv(mom, singles, args.g, meter.sigma)
        pred = correlator_predictions(*singles, target, args.g, meter.sigma)
        report.add("sequential_weak_value", target)
        report.add("single_weak_values", list(singles))
        report.add("estimate_correlator", est.correlator)
        report.add("estimate_subtraction", est.subtraction)
        for key in ("xx", "kk", "xk", "kx"):
            report.add(f"<{key[0]}1{key[1]}2>", getattr(mom, key))
            report.check(f"<{key[0]}1{key[1]}2> vs leading order", abs(getattr(mom, key) - pred[key]),
                         max(1e-8, 50 * args.g**3))
        report.check("|correlator estimate - weak value| < 50 g", abs(est.correlator - target), 50 * args.g)
    if args.scaling:
        study = scaling_study(inst, args.scaling, meter)
        for row in study.rows:
            report.add(f"scaling g={row.g!r}", {"estimate": row.estimate, "error": row.error, "residual": row.residual})
        report.add("scaling_slope", study.slope)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histweak", description="Sequential weak values of coarse-grained quantum histories.")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    # also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def network_options(p):
        group = p.add_mutually_exclusive_group()
        group.add_argument("--weak", type=_labels, metavar="LABELS", help="single-time weak values, e.g. x3,x4")
        group.add_argument("--seq", type=_labels, action="append", metavar="LABELS", help="one sequential weak value, e.g. x7,x5,x3 (repeatable)")
        group.add_argument("--histories", action="store_true", help="list continuous histories with amplitudes")
        group.add_argument("--sum", action="store_true", help="Feynman sums (default)")

    p = sub.add_parser("fig1", parents=[common], help="built-in nine-history interferometer")
    p.add_argument("--bn", type=int, default=4)
    network_options(p)
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("net", parents=[common], help="network read from a file")
    p.add_argument("file")
    network_options(p)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("check", parents=[common], help="randomised property suites")
    p.add_argument("--suite", choices=sorted(SUITES), required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("pointer", parents=[common], help="Gaussian-pointer weak measurement simulation")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--single", dest="sequential", action="store_false")
    mode.add_argument("--sequential", dest="sequential", action="store_true")
    p.add_argument("--g", type=float, default=0.02)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--halfwidth", type=float, default=None)
    p.add_argument("--scaling", type=_floats, metavar="G1,G2,...")
    p.add_argument("--instance", metavar="FILE", help="JSON pointer instance")
    p.add_argument("--seed", type=int, default=None, help="use a random instance from this seed")
    p.set_defaults(func=cmd_pointer)

    p = sub.add_parser("version", parents=[common], help="print the version")
    p.set_defaults(func=None)
    p = sub.add_parser("help", parents=[common], help="show this help")
    p.set_defaults(func=None)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "version":
        print(f"histweak {__version__}", file=stdout)
        return 0
    if args.command == "help":
        parser.print_help(stdout)
        return 0
    try:
        report = args.func(args)
    except (HistweakError, ValueError, OSError, KeyError) as exc:
        print(f"histweak: error: {exc}", file=stderr)
        return 1
    stdout.write(report.render(args.format))
    return 0 if report.ok else 1


def main():
    sys.exit(run())
