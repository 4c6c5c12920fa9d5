"""Recovery tables, drift curves and the CSV / text files built from them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .grid_pde import ModelParams
from .inference import PARAM_NAMES, Chain, effective_sample_size, posterior_histogram


@dataclass(frozen=True)
class RecoveryRow:
    label: str
    method: str
    noise: float | None
    init: tuple | None
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.init is not None:
            object.__setattr__(self, "init", tuple(float(v) for v in self.init))


@dataclass(frozen=True)
class RecoveryTable:
    name: str
    rows: list
    expected: RecoveryRow
    initial_guess: RecoveryRow | None = None

    def all_rows(self) -> list:
        head = [self.initial_guess] if self.initial_guess is not None else []
        return head + list(self.rows) + [self.expected]

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "method", "noise", "init", *PARAM_NAMES])
            for row in self.all_rows():
                init = "" if row.init is None else " ".join(repr(v) for v in row.init)
                noise = "" if row.noise is None else repr(float(row.noise))
                w.writerow([row.label, row.method, noise, init, *(repr(v) for v in row.values)])

    @classmethod
    def from_csv(cls, path, name: str | None = None) -> "RecoveryTable":
        with open(Path(path), newline="") as fh:
            raw = list(csv.DictReader(fh))
        rows = []
        for r in raw:
            rows.append(
                RecoveryRow(
                    label=r["label"],
                    method=r["method"],
                    noise=float(r["noise"]) if r["noise"] else None,
                    init=tuple(float(v) for v in r["init"].split()) if r["init"] else None,
                    values=tuple(float(r[n]) for n in PARAM_NAMES),
                )
            )
        initial = rows[0] if rows and rows[0].method == "initial" else None
        body = [r for r in rows if r.method not in ("initial", "expected")]
        expected = [r for r in rows if r.method == "expected"]
        if len(expected) != 1:
            raise ValueError("table must contain exactly one expected-value row")
        stem = Path(path).stem
        return cls(name or stem.removeprefix("table_"), body, expected[0], initial)

    def to_text(self) -> str:
        header = ["Parameters", *PARAM_NAMES]
        lines = [[row.label, *(f"{v:.4f}" for v in row.values)] for row in self.all_rows()]
        widths = [max(len(r[i]) for r in [header, *lines]) for i in range(len(header))]
        fmt = lambda r: " | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
        rule = "-+-".join("-" * w for w in widths)
        return "\n".join([fmt(header), rule, *(fmt(r) for r in lines)])


def _vector(p) -> np.ndarray:
    return p.theta if isinstance(p, ModelParams) else np.asarray(p, dtype=float).ravel()


def build_recovery_table(
    runs,
    expected,
    name: str = "recovery",
    initial_guess=None,
) -> RecoveryTable:
    """
    Table with one row per run (input order) and the expected values last.

    ``runs`` is a sequence of RecoveryRow or mappings with keys ``label``,
    ``method``, ``theta`` and optionally ``noise`` and ``init``.
    """
    if not runs:
        raise ValueError("at least one run is required")
    rows = []
    for run in runs:
        if isinstance(run, RecoveryRow):
            rows.append(run)
            continue
        init = run.get("init")
        rows.append(
            RecoveryRow(
                label=run["label"],
                method=run["method"],
                noise=run.get("noise"),
                init=None if init is None else tuple(_vector(init)),
                values=tuple(_vector(run["theta"])),
            )
        )
    labels = [r.label for r in rows]
    dupes = sorted({l for l in labels if labels.count(l) > 1})
    if dupes:
        raise ValueError(f"duplicate run labels: {dupes}")
    exp_row = RecoveryRow("The expected value", "expected", None, None, tuple(_vector(expected)))
    init_row = None
    if initial_guess is not None:
        init_row = RecoveryRow("Initial guess", "initial", None, None, tuple(_vector(initial_guess)))
    return RecoveryTable(name, rows, exp_row, init_row)


def cubic_drift(theta, y) -> np.ndarray:
    """Drift perturbation theta1 y + theta2 y^2 + theta3 y^3 (no rate)."""
    t = _vector(theta)
    y = np.asarray(y, dtype=float)
    return y * (t[0] + y * (t[1] + y * t[2]))


@dataclass(frozen=True)
class DriftCurve:
    y: np.ndarray
    curves: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        labels = list(self.curves)
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", *labels])
            for i, yv in enumerate(self.y):
                w.writerow([repr(float(yv)), *(repr(float(self.curves[l][i])) for l in labels)])

    @classmethod
    def from_csv(cls, path) -> "DriftCurve":
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        return cls(data[:, 0], {lab: data[:, i + 1] for i, lab in enumerate(header[1:])})


def build_drift_curve(
    params_list: Mapping,
    y_range: tuple[float, float] = (-1.0, 1.0),
    n_samples: int = 201,
    exact: Mapping[str, Callable] | None = None,
) -> DriftCurve:
    """
    Sample drift perturbations on a uniform y grid.

    ``exact`` curves (e.g. the true ``np.sin``) are evaluated as given;
    every entry of ``params_list`` is read as cubic coefficients.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    y = np.linspace(y_range[0], y_range[1], n_samples)
    curves = {}
    for label, fn in (exact or {}).items():
        curves[label] = np.asarray(fn(y), dtype=float)
    for label, p in params_list.items():
        if label in curves:
            raise ValueError(f"duplicate curve label {label!r}")
        curves[label] = cubic_drift(p, y)
    return DriftCurve(y, curves)


def write_table(outdir, table: RecoveryTable) -> Path:
    path = Path(outdir) / f"table_{table.name}.csv"
    table.to_csv(path)
    return path


def write_trace(outdir, name: str, chain: Chain) -> Path:
    path = Path(outdir) / f"trace_{name}.csv"
    chain.to_csv(path)
    return path


def write_histograms(outdir, name: str, chain: Chain, n_bins: int = 50) -> list:
    paths = []
    for coord in PARAM_NAMES:
        path = Path(outdir) / f"hist_{name}_{coord}.csv"
        posterior_histogram(chain, coord, n_bins).to_csv(path)
        paths.append(path)
    return paths


def write_drift(outdir, name: str, curve: DriftCurve) -> Path:
    path = Path(outdir) / f"drift_{name}.csv"
    curve.to_csv(path)
    return path


def chain_summary(name: str, chain: Chain) -> str:
    ess = [effective_sample_size(chain.retained[:, i]) for i in range(chain.samples.shape[1])]
    adapted = len(chain.gamma_history) > 1 and chain.gamma_history[-1][1] != chain.gamma_history[0][1]
    return (
        f"{name}: K={len(chain)} burn_in={chain.burn_in} acceptance={chain.acceptance_rate:.3f} "
        f"final_gamma={[round(float(g), 6) for g in chain.proposal_gamma]} "
        f"gamma_adapted={'yes' if adapted else 'no'} "
        f"ESS={[round(float(e), 1) for e in ess]}"
    )


def write_summary(outdir, tables: list, notes: list | None = None) -> Path:
    path = Path(outdir) / "summary.txt"
    parts = []
    for t in tables:
        parts.append(f"== {t.name} ==\n{t.to_text()}\n")
    if notes:
        parts.append("== diagnostics ==\n" + "\n".join(notes) + "\n")
    path.write_text("\n".join(parts))
    return path
