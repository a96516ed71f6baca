"""Run a ScenarioConfig and render its report.

The data section of a report (config echo, PRNG, tables, checks) is a pure
function of the config.  Wall-clock duration is metadata and is emitted
separately so data bytes stay stable across runs and ``--jobs`` settings.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import measurement as ms
from . import robustness as rb
from . import rules
from .config import ScenarioConfig
from .hilbert import OperatorMatrix
from .twostate import TwoState, make_two_state_density, weak_value

FORMATS = ("text", "csv", "jsonl")


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    relation: str = "<="


@dataclass
class ScenarioReport:
    kind: str
    config: dict
    prng: str
    tables: list[Table] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    notes: tuple[str, ...] = ()
    error: Optional[str] = None
    duration: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _le(name, value, tol) -> Check:
    value = float(value)
    return Check(name, bool(value <= tol), value, float(tol))


def _matrix_rows(m: np.ndarray) -> tuple:
    return tuple(
        (i, j, float(m[i, j].real), float(m[i, j].imag))
        for i in range(m.shape[0]) for j in range(m.shape[1])
    )


def _run_abl(cfg, rep, jobs):
    p = cfg.params
    abl = rules.abl_probability(p["initial"], p["final"], p["observable"])
    born = rules.born_probability(p["initial"], p["observable"])
    rep.tables.append(Table("distribution", ("eigenvalue", "probability"),
                            tuple((float(e), float(q)) for e, q in abl)))
    rep.tables.append(Table("born", ("eigenvalue", "probability"),
                            tuple((float(e), float(q)) for e, q in born)))
    rep.checks.append(_le("abl_sum_error", abs(abl.probabilities.sum() - 1), 1e-12))


def _run_weak(cfg, rep, jobs):
    p = cfg.params
    ts = TwoState(p["initial"], p["final"])
    rows = []
    for name, op in p["observables"].items():
        w = weak_value(ts, op)
        rows.append((name, float(w.real), float(w.imag)))
    rep.tables.append(Table("weak_values", ("observable", "re", "im"), tuple(rows)))
    d = make_two_state_density(ts)
    ov, tr = ts.overlap, d.trace()
    rep.tables.append(Table("two_state", ("quantity", "re", "im"), (
        ("overlap", float(ov.real), float(ov.imag)),
        ("density_trace", float(tr.real), float(tr.imag)),
    )))
    rep.checks.append(_le("trace_unit_modulus_error", abs(abs(tr) - 1), 1e-10))


def _run_born(cfg, rep, jobs):
    p = cfg.params
    sample = rules.sample_final_states(p["initial"], p["observable"], p["size"], cfg.seed)
    stat, pval = rules.chi_square(sample)
    rep.tables.append(Table("counts", ("eigenvalue", "born", "count", "frequency"), tuple(
        (float(e), float(b), int(c), float(f))
        for e, b, c, f in zip(sample.eigenvalues, sample.born, sample.counts, sample.frequencies)
    )))
    dof = sum(1 for b in sample.born if b > 0) - 1
    rep.tables.append(Table("chi_square", ("statistic", "p_value", "dof"), ((stat, pval, dof),)))
    m = sample.size
    worst = max(
        abs(c - m * b) / (4 * np.sqrt(m * b * (1 - b))) if 0 < b < 1 else abs(c - m * b)
        for c, b in zip(sample.counts, sample.born)
    )
    rep.checks.append(_le("counts_within_4_sigma", worst, 1.0))
    rep.checks.append(_le("conditional_nondeterminism", 0.0 if sample.conditional_deterministic else 1.0, 0.0))


def _window_table(report: ms.BranchReport) -> Table:
    def opt(v):
        return "" if v is None else float(v)

    return Table("windows", ("window", "start", "end", "target_residual", "selected_weight", "residual_weight"),
                 tuple((w.name, float(w.start), float(w.end), opt(w.target_residual),
                        opt(w.selected_weight), opt(w.residual_weight)) for w in report.windows))


def _measurement_tables(report: ms.BranchReport, rep, reduced_windows):
    rep.tables.append(_window_table(report))
    b = report.boundary
    rep.tables.append(Table("boundary", ("branch", "projection_weight", "weak_value_re", "weak_value_im"), tuple(
        (k, float(wt), float(wv.real), float(wv.imag))
        for k, (wt, wv) in enumerate(zip(b.projection_weights, b.branch_weak_values))
    )))
    for name in reduced_windows:
        w = report.window(name)
        rep.tables.append(Table(f"reduced_{name}", ("row", "col", "re", "im"), _matrix_rows(w.reduced.matrix)))
    drift = max(abs(n - 1) for n in report.forward_norms)
    rep.checks.append(_le("norm_drift", drift, 1e-10))
    rep.checks.append(_le("reversal_error", report.reversal_error, 1e-10))


def _run_single(cfg, rep, jobs):
    p = cfg.params
    scen = ms.single_measurement_scenario(**p)
    report = ms.run_single_measurement(scen)
    _measurement_tables(report, rep, ["selected"])
    rep.tables.append(Table("selection", ("selected_weight", "residual_weight"),
                            ((float(report.selected_weight), float(report.residual_weight)),)))
    eps, ratio = p["eps_orth"], p["projection_ratio"]
    if ratio is None:
        expected = eps**2 / (1 + eps**2)
        tol = 1e-10 if eps == 0 else 2 * expected
        rep.checks.append(_le("unselected_residual", report.residual_weight, tol))


def _run_sequential(cfg, rep, jobs):
    scen = ms.sequential_measurement_scenario(**cfg.params)
    report = ms.run_sequential_measurement(scen)
    _measurement_tables(report, rep, ["before_first", "between", "after_second"])
    rep.tables.append(Table("coefficients", ("name", "re", "im"), tuple(
        (k, float(v.real), float(v.imag)) for k, v in report.coefficients.items()
    )))
    if cfg.params["eps_orth"] == 0:
        for name in ("before_first", "between", "after_second"):
            rep.checks.append(_le(f"{name}_target_residual", report.window(name).target_residual, 1e-10))


def _run_signaling(cfg, rep, jobs):
    res = ms.run_signaling_demo(cfg.params["alice_acts"])
    rep.tables.append(Table("bob", ("outcome", "probability", "marginalized"), (
        ("up_B", res.bob[0], res.bob_marginalized[0]),
        ("down_B", res.bob[1], res.bob_marginalized[1]),
    )))
    rep.tables.append(Table("outcome", ("alice_acts", "outcome"), ((res.alice_acts, res.outcome),)))
    rep.checks.append(_le("bob_determinism_error", 1 - max(res.bob), 1e-12))
    rep.checks.append(_le("marginal_error", max(abs(q - 0.5) for q in res.bob_marginalized), 1e-10))


def _run_sweep(cfg, rep, jobs):
    p = cfg.params
    rows = rb.sweep_robustness(p["c"], p["N"], p["n"], collapse=p["collapse"], jobs=jobs)
    rep.tables.append(Table("sweep", rb.SWEEP_COLUMNS, tuple(
        (r.c, r.N, r.n, r.log10_ratio_exact, r.log10_ratio_approx) for r in rows
    )))
    fits = rb.fit_scaling(rows)
    fit_rows = []
    for c, (slope, intercept, resid) in fits.items():
        expected = -2 * np.log10(c)
        fit_rows.append((c, slope, float(expected), intercept, resid))
        if p["collapse"] == "symmetric":
            rep.checks.append(_le(f"slope_error_c={c!r}", abs(slope - expected), 1e-9))
            rep.checks.append(_le(f"fit_residual_c={c!r}", resid, 1e-9))
    rep.tables.append(Table("fit", ("c", "slope", "expected_slope", "intercept", "max_residual"), tuple(fit_rows)))

    worst = 0.0
    for c in p["c"]:
        series = sorted((r.N - r.n, r.log10_ratio_exact) for r in rows if r.c == c and r.log10_ratio_exact is not None)
        for (x0, y0), (x1, y1) in zip(series, series[1:]):
            if x1 > x0 and c < 1:
                worst = max(worst, y0 - y1)
    rep.checks.append(_le("monotone_violation", worst, 1e-9))


_RUNNERS = {
    "abl_query": _run_abl,
    "weak_value_query": _run_weak,
    "born_ensemble": _run_born,
    "single_measurement": _run_single,
    "sequential_measurement": _run_sequential,
    "signaling": _run_signaling,
    "robustness_sweep": _run_sweep,
}


def run(cfg: ScenarioConfig, jobs: int = 1) -> ScenarioReport:
    """Dispatch ``cfg``; module errors land in ``report.error`` rather than raising."""
    rep = ScenarioReport(cfg.kind, cfg.raw, f"{rules.PRNG_NAME} {rules.PRNG_VERSION}", notes=cfg.notes)
    start = time.perf_counter()
    try:
        _RUNNERS[cfg.kind](cfg, rep, jobs)
    except (ValueError, ArithmeticError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    rep.duration = time.perf_counter() - start
    return rep


def _cell(v) -> str:
    if v is None:
        return "divergent"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if v is None:
        return "divergent"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _csv_table(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.columns)
    w.writerows([_cell(v) for v in row] for row in t.rows)
    return buf.getvalue()


def _text(rep: ScenarioReport) -> str:
    out = [f"scenario: {rep.kind}", f"prng: {rep.prng}",
           "config: " + json.dumps(rep.config, sort_keys=True)]
    out += [f"note: {n}" for n in rep.notes]
    for t in rep.tables:
        cells = [list(t.columns)] + [[_cell(v) for v in row] for row in t.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(t.columns))]
        out.append("")
        out.append(f"[{t.name}]")
        for r in cells:
            out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    if rep.checks:
        out.append("")
        out.append("[checks]")
        for c in rep.checks:
            out.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.value!r} {c.relation} {c.tolerance!r}")
    if rep.error:
        out.append("")
        out.append(f"error: {rep.error}")
    return "\n".join(out) + "\n"


def _csv(rep: ScenarioReport) -> str:
    if len(rep.tables) == 1:
        return _csv_table(rep.tables[0])
    parts = [f"# {t.name}\n" + _csv_table(t) for t in rep.tables]
    return "\n".join(parts)


def _jsonl(rep: ScenarioReport) -> str:
    lines = [{"record": "config", "kind": rep.kind, "prng": rep.prng, "config": rep.config, "notes": list(rep.notes)}]
    for t in rep.tables:
        for row in t.rows:
            lines.append({"record": "row", "table": t.name, **{c: _json_value(v) for c, v in zip(t.columns, row)}})
    for c in rep.checks:
        lines.append({"record": "check", "name": c.name, "passed": c.passed, "value": c.value,
                      "relation": c.relation, "tolerance": c.tolerance})
    if rep.error:
        lines.append({"record": "error", "message": rep.error})
    return "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines)


def render(rep: ScenarioReport, fmt: str = "text") -> str:
    """Data section only; identical for identical configs."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    return {"text": _text, "csv": _csv, "jsonl": _jsonl}[fmt](rep)


def metadata(rep: ScenarioReport) -> str:
    return json.dumps({"duration_s": rep.duration, "ok": rep.ok}, sort_keys=True)


def emit_report(rep: ScenarioReport, fmt: str = "text", out: Optional[str] = None) -> str:
    """Write the data section to ``out`` (metadata to ``out + '.meta.json'``).

    Returns the data section.  Unwritable paths raise OSError.
    """
    data = render(rep, fmt)
    if out is not None:
        path = Path(out)
        path.write_text(data)
        Path(str(path) + ".meta.json").write_text(metadata(rep) + "\n")
    return data
