"""Experiment reports: checks, verdicts and their CSV / JSON forms."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Check", "ExperimentReport", "fmt_float", "atomic_write"]

CSV_COLUMNS = ("check", "N", "statistic", "bound", "margin", "tolerance", "pass")
_KINDS = ("equal", "upper", "lower")


def fmt_float(x) -> str:
    """Decimal float with 17 significant digits (round-trip exact)."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "pass" if x else "fail"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class Check:
    """One verdict.

    ``kind`` selects the rule:

    ``"equal"``  pass iff ``|statistic - reference| <= tolerance``;
    ``"upper"``  pass iff ``reference - statistic >= -tolerance``
    (the statistic must not exceed the bound);
    ``"lower"``  pass iff ``statistic - reference >= -tolerance``.

    The reported margin is ``-|statistic - reference|``, ``reference -
    statistic`` or ``statistic - reference`` respectively, so in every case
    the verdict is ``margin >= -tolerance``.
    """

    name: str
    statistic: float
    reference: float
    tolerance: float = 0.0
    kind: str = "equal"
    N: int | None = None
    note: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")

    @property
    def margin(self) -> float:
        s, r = float(self.statistic), float(self.reference)
        if self.kind == "equal":
            return 0.0 - abs(s - r) + 0.0
        if self.kind == "upper":
            return r - s
        return s - r

    @property
    def passed(self) -> bool:
        m = self.margin
        return bool(not math.isnan(m) and m >= -float(self.tolerance))

    def row(self):
        return [self.name, "" if self.N is None else str(int(self.N)), fmt_float(self.statistic),
                fmt_float(self.reference), fmt_float(self.margin), fmt_float(self.tolerance),
                "pass" if self.passed else "fail"]

    def to_dict(self):
        return {
            "name": self.name,
            "N": None if self.N is None else int(self.N),
            "kind": self.kind,
            "statistic": float(self.statistic),
            "reference": float(self.reference),
            "tolerance": float(self.tolerance),
            "margin": float(self.margin),
            "pass": self.passed,
            "note": self.note,
        }


@dataclass
class ExperimentReport:
    """Named checks of one suite plus optional sweep series.

    Attributes
    ----------
    suite : str
    checks : list of Check
    series : dict
        For sweep suites, ``{"columns": [...], "rows": [[...], ...]}`` keyed
        by series name; consumed by plot-data export.
    provenance : dict
        Seed, symbol hash and tool version.
    """

    suite: str
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    sweep: bool = False

    def add(self, *args, **kw) -> Check:
        c = args[0] if args and isinstance(args[0], Check) else Check(*args, **kw)
        self.checks.append(c)
        return c

    def add_series(self, name, columns, rows):
        self.series[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}
        self.sweep = True

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def extend(self, other: "ExperimentReport", prefix=""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.statistic, c.reference, c.tolerance,
                                     c.kind, c.N, c.note))
        for k, v in other.series.items():
            self.series[prefix + k] = v
        self.sweep = self.sweep or other.sweep

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.checks:
            w.writerow(c.row())
        return buf.getvalue()

    def to_dict(self):
        return {
            "suite": self.suite,
            "passed": self.passed,
            "provenance": self.provenance,
            "wall_time": self.wall_time,
            "checks": [c.to_dict() for c in self.checks],
            "series": self.series,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def summary(self) -> str:
        lines = [f"suite {self.suite}: {'PASS' if self.passed else 'FAIL'} "
                 f"({len(self.checks) - len(self.failures())}/{len(self.checks)} checks)"]
        for c in self.failures():
            lines.append(f"  fail {c.name} N={c.N} statistic={c.statistic:.6g} "
                         f"bound={c.reference:.6g} margin={c.margin:.3g} tol={c.tolerance:.3g}")
        return "\n".join(lines)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
