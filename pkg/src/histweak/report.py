"""Deterministic JSON/CSV reports."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from numbers import Complex, Integral, Real


def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def _dump(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, Integral):
        return str(int(obj))
    if isinstance(obj, Real):
        return _num(obj)
    if isinstance(obj, Complex):
        z = complex(obj)
        return "{" + f'"im": {_num(z.imag)}, "re": {_num(z.real)}' + "}"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass
class Report:
    command: str
    inputs: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    def add(self, name: str, value):
        self.results.append({"name": name, "value": value})

    def check(self, name: str, deviation: float, tolerance: float) -> bool:
        passed = bool(deviation < tolerance)
        self.checks.append({"name": name, "pass": passed, "deviation": float(deviation), "tolerance": tolerance})
        return passed

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"command": self.command, "inputs": self.inputs, "results": self.results, "checks": self.checks}

    def to_json(self) -> str:
        return _dump(self.to_dict()) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "name", "re", "im", "text", "pass", "deviation"])
        for key in sorted(self.inputs):
            w.writerow(["input", key, *_cells(self.inputs[key]), "", ""])
        for r in self.results:
            w.writerow(["result", r["name"], *_cells(r["value"]), "", ""])
        for c in self.checks:
            w.writerow(["check", c["name"], "", "", "", "pass" if c["pass"] else "fail", _num(c["deviation"])])
        return buf.getvalue()

    def render(self, fmt: str = "json") -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _cells(value):
    if isinstance(value, bool) or value is None or isinstance(value, (str, list, tuple, dict)):
        text = value if isinstance(value, str) else _dump(value)
        return ["", "", text]
    if isinstance(value, Real):
        return [_num(value), "", ""]
    z = complex(value)
    return [_num(z.real), _num(z.imag), ""]
