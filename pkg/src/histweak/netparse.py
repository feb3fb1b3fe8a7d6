"""Interferometer networks: a line-oriented text format and the model built from it.

Format (UTF-8, one statement per line)::

    # comment
    slice 0: S
    slice 1: x1 x2
    step 0 -> 1: S x1 0.7071067811865476
    step 0 -> 1: S x2 0.7071067811865476 0.0
    source: S
    detector: D
    bn: 4

Slices are time slices numbered consecutively from 0. A ``step`` line is
one directed amplitude between nodes of adjacent slices; the imaginary
part is optional. ``source`` and ``detector`` default to the sole node of
the first and last slice.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import (
    DuplicateEdge,
    InconsistentDimensions,
    NetworkSyntaxError,
    NonAdjacentSlice,
    UnknownNode,
    ValidationError,
)
from .histories import HistorySpace, SegmentedEvolution

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_SLICE = re.compile(r"slice\s+(?P<idx>\S+)\s*:(?P<rest>.*)$")
_STEP = re.compile(r"step\s+(?P<i>\S+)\s*(?:->|→)\s*(?P<j>\S+)\s*:(?P<rest>.*)$")
_KEY = re.compile(r"(?P<key>source|detector|bn)\s*:\s*(?P<value>.*)$")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    amplitude: complex


@dataclass(frozen=True)
class NetworkSpec:
    slices: tuple[tuple[str, ...], ...]
    steps: tuple[tuple[Edge, ...], ...]
    source: str
    detector: str
    bn: int | None = None

    @property
    def k(self) -> int:
        return len(self.slices) - 2


def _fields(text: str, offset: int):
    """Whitespace-separated tokens with their 1-based columns."""
    return [(m.group(), offset + m.start() + 1) for m in re.finditer(r"\S+", text)]


def parse(text: str, source: str = "<network>") -> NetworkSpec:
    slice_decl: dict[int, tuple[tuple[str, ...], int]] = {}
    raw_steps: list[tuple[int, int, int, list]] = []
    keys: dict[str, tuple[str, int, int]] = {}

    def fail(cls, msg, line, col):
        raise cls(msg, line, col, source)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip())
        if m := _SLICE.match(stripped):
            idx_text = m.group("idx")
            if not idx_text.isdigit():
                fail(NetworkSyntaxError, f"slice index {idx_text!r} is not a non-negative integer", lineno, indent + m.start("idx") + 1)
            idx = int(idx_text)
            if idx in slice_decl:
                fail(NetworkSyntaxError, f"slice {idx} declared twice", lineno, indent + m.start("idx") + 1)
            nodes = _fields(m.group("rest"), indent + m.start("rest"))
            if not nodes:
                fail(NetworkSyntaxError, f"slice {idx} has no nodes", lineno, indent + len(stripped) + 1)
            seen = set()
            for name, col in nodes:
                if not re.fullmatch(_NAME, name):
                    fail(NetworkSyntaxError, f"bad node name {name!r}", lineno, col)
                if name in seen:
                    fail(NetworkSyntaxError, f"node {name!r} repeated in slice {idx}", lineno, col)
                seen.add(name)
            slice_decl[idx] = (tuple(n for n, _ in nodes), lineno)
        elif m := _STEP.match(stripped):
            cols = {g: indent + m.start(g) + 1 for g in ("i", "j")}
            for g in ("i", "j"):
                if not m.group(g).isdigit():
                    fail(NetworkSyntaxError, f"step index {m.group(g)!r} is not a non-negative integer", lineno, cols[g])
            i, j = int(m.group("i")), int(m.group("j"))
            if j != i + 1:
                fail(NonAdjacentSlice, f"step {i} -> {j} does not join adjacent slices", lineno, cols["j"])
            toks = _fields(m.group("rest"), indent + m.start("rest"))
            if len(toks) not in (3, 4):
                col = toks[0][1] if toks else indent + len(stripped) + 1
                fail(NetworkSyntaxError, "expected '<from> <to> <re> [<im>]'", lineno, col)
            for tok, col in toks[2:]:
                if not re.fullmatch(_NUMBER, tok):
                    fail(NetworkSyntaxError, f"bad amplitude literal {tok!r}", lineno, col)
            raw_steps.append((lineno, i, j, toks))
        elif m := _KEY.match(stripped):
            key, value = m.group("key"), m.group("value").strip()
            col = indent + m.start("value") + 1
            if key in keys:
                fail(NetworkSyntaxError, f"{key} given twice", lineno, indent + 1)
            if not value or len(value.split()) != 1:
                fail(NetworkSyntaxError, f"{key} needs exactly one value", lineno, col)
            keys[key] = (value, lineno, col)
        else:
            fail(NetworkSyntaxError, f"unrecognised statement {stripped.split()[0]!r}", lineno, indent + 1)

    last_line = len(text.splitlines())
    if not slice_decl:
        fail(NetworkSyntaxError, "no slices declared", last_line, 1)
    count = len(slice_decl)
    for expect in range(count):
        if expect not in slice_decl:
            bad = max(slice_decl)
            fail(NetworkSyntaxError, f"slice indices must run 0..{count - 1} without gaps (missing {expect})", slice_decl[bad][1], 1)
    if count < 2:
        fail(NetworkSyntaxError, "a network needs at least two slices", slice_decl[0][1], 1)
    slices = tuple(slice_decl[i][0] for i in range(count))

    steps: list[list[Edge]] = [[] for _ in range(count - 1)]
    seen_edges = {}
    for lineno, i, j, toks in raw_steps:
        (src, src_col), (dst, dst_col) = toks[0], toks[1]
        if j >= count:
            fail(UnknownNode, f"step targets undeclared slice {j}", lineno, dst_col)
        if src not in slices[i]:
            fail(UnknownNode, f"node {src!r} is not declared in slice {i}", lineno, src_col)
        if dst not in slices[j]:
            fail(UnknownNode, f"node {dst!r} is not declared in slice {j}", lineno, dst_col)
        if (i, src, dst) in seen_edges:
            fail(DuplicateEdge, f"edge {src} -> {dst} in step {i} already given on line {seen_edges[(i, src, dst)]}", lineno, src_col)
        seen_edges[(i, src, dst)] = lineno
        re_part = float(toks[2][0])
        im_part = float(toks[3][0]) if len(toks) == 4 else 0.0
        steps[i].append(Edge(src, dst, complex(re_part, im_part)))

    def endpoint(key, pos, label):
        if key in keys:
            name, lineno, col = keys[key]
            if name not in slices[pos]:
                fail(UnknownNode, f"{label} {name!r} is not in slice {pos}", lineno, col)
        elif len(slices[pos]) == 1:
            name = slices[pos][0]
        else:
            fail(NetworkSyntaxError, f"{label} not given and slice {pos} has several nodes", last_line, 1)
        for s, nodes in enumerate(slices):
            if s != pos and name in nodes:
                fail(NetworkSyntaxError, f"{label} {name!r} must only appear in slice {pos}", slice_decl[s][1], 1)
        return name

    src = endpoint("source", 0, "source")
    det = endpoint("detector", count - 1, "detector")

    bn = None
    if "bn" in keys:
        value, lineno, col = keys["bn"]
        if not value.isdigit():
            fail(NetworkSyntaxError, f"bn must be a non-negative integer, got {value!r}", lineno, col)
        bn = int(value)

    return NetworkSpec(slices, tuple(tuple(s) for s in steps), src, det, bn)


def _format_float(x: float) -> str:
    return repr(float(x))


def serialize(spec: NetworkSpec) -> str:
    lines = []
    for i, nodes in enumerate(spec.slices):
        lines.append(f"slice {i}: {' '.join(nodes)}")
    for i, edges in enumerate(spec.steps):
        for e in edges:
            amp = f"{_format_float(e.amplitude.real)}"
            if e.amplitude.imag != 0:
                amp += f" {_format_float(e.amplitude.imag)}"
            lines.append(f"step {i} -> {i + 1}: {e.src} {e.dst} {amp}")
    lines.append(f"source: {spec.source}")
    lines.append(f"detector: {spec.detector}")
    if spec.bn is not None:
        lines.append(f"bn: {spec.bn}")
    return "\n".join(lines) + "\n"


_S = 2.0 ** -0.5

# (from, to, sign) per step; every listed port carries 2^-1/2 except the x1 arm.
_FIG1_SPLITTERS = (
    (("S", "x1", 1), ("S", "x2", 1)),
    (("x2", "x3", 1), ("x2", "x4", 1)),
    (("x3", "x5", 1), ("x3", "x6", 1), ("x4", "x5", 1), ("x4", "x6", -1)),
    (("x5", "x7", 1), ("x5", "x8", -1), ("x6", "x7", -1), ("x6", "x8", -1)),
    (("x7", "x9", 1), ("x8", "x9", 1)),
    (("x1", "D", 1), ("x9", "D", 1)),
)


def fig1_builtin(bn: int = 4) -> NetworkSpec:
    """The nine-history interferometer with ``bn`` extra beam splitters on the x1 arm.

    The x1 arm passes through the ``bn`` splitters between slices 1 and 2,
    each transmitting 2^-1/2, so that arm's amplitude is 2^-(bn+2)/2.
    """
    if bn < 0:
        raise ValidationError("bn must be non-negative")
    slices = (
        ("S",),
        ("x1", "x2"),
        ("x1", "x3", "x4"),
        ("x1", "x5", "x6"),
        ("x1", "x7", "x8"),
        ("x1", "x9"),
        ("D",),
    )
    arm = {1: 2.0 ** (-bn / 2), 2: 1.0, 3: 1.0, 4: 1.0}
    steps = []
    for i, ports in enumerate(_FIG1_SPLITTERS):
        edges = []
        if i in arm:
            edges.append(Edge("x1", "x1", complex(arm[i])))
        edges.extend(Edge(a, b, complex(sign * _S)) for a, b, sign in ports)
        steps.append(tuple(edges))
    return NetworkSpec(slices, tuple(steps), "S", "D", bn)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    spec: NetworkSpec
    dim: int
    space: HistorySpace
    evolution: SegmentedEvolution
    slot_labels: tuple[tuple[str, ...], ...] = field(repr=False)

    @property
    def propagators(self) -> tuple[np.ndarray, ...]:
        return self.evolution.segments

    @property
    def families(self):
        return self.space.families

    def node_index(self, slice_index: int, node: str) -> int:
        return self.slot_labels[slice_index].index(node)

    def resolve(self, label: str) -> tuple[int, la.Projector]:
        """Map ``name`` or ``name@slice`` to (time index, projector) at an intermediate slice."""
        name, _, where = label.partition("@")
        if where:
            if not where.isdigit():
                raise ValidationError(f"bad slice in label {label!r}")
            t = int(where)
            if not 1 <= t <= self.spec.k or name not in self.spec.slices[t]:
                raise ValidationError(f"node {name!r} is not in intermediate slice {t}")
        else:
            hits = [t for t in range(1, self.spec.k + 1) if name in self.spec.slices[t]]
            if not hits:
                raise ValidationError(f"node {name!r} is not in any intermediate slice")
            t = hits[0]
        return t, self.space.families[t - 1][self.node_index(t, name)]

    def label(self, slice_index: int, node: str) -> str:
        hits = [t for t in range(1, self.spec.k + 1) if node in self.spec.slices[t]]
        return node if hits and hits[0] == slice_index else f"{node}@{slice_index}"


def build_model(spec: NetworkSpec) -> NetworkModel:
    """Embed every slice in one Hilbert space and assemble propagator matrices.

    Node ``m`` of a slice maps to basis vector ``m``. Slices narrower than
    the widest one are padded with auxiliary basis projectors (labelled
    ``~m``), which receive no amplitude.
    """
    if len(spec.slices) < 2 or any(len(s) == 0 for s in spec.slices):
        raise InconsistentDimensions("every slice needs at least one node and there must be two slices")
    if len(spec.steps) != len(spec.slices) - 1:
        raise InconsistentDimensions(f"{len(spec.slices)} slices need {len(spec.slices) - 1} steps, got {len(spec.steps)}")
    dim = max(len(s) for s in spec.slices)
    labels = tuple(tuple(s) + tuple(f"~{m}" for m in range(len(s), dim)) for s in spec.slices)

    props = []
    for i, edges in enumerate(spec.steps):
        t = np.zeros((dim, dim), dtype=complex)
        for e in edges:
            try:
                a = spec.slices[i].index(e.src)
                b = spec.slices[i + 1].index(e.dst)
            except ValueError:
                raise InconsistentDimensions(f"edge {e.src} -> {e.dst} leaves step {i}") from None
            t[b, a] += e.amplitude
        props.append(t)

    families = tuple(la.basis_family(dim) for _ in spec.slices[1:-1])
    pre = la.basis(dim, spec.slices[0].index(spec.source))
    post = la.basis(dim, spec.slices[-1].index(spec.detector))
    space = HistorySpace(families, pre, post, labels=labels[1:-1])
    ev = SegmentedEvolution(props, check_unitary=False)
    return NetworkModel(spec, dim, space, ev, labels)


def load(path) -> NetworkSpec:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), source=str(path))
