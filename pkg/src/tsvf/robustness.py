"""Robustness of a macroscopic record when part of its environment collapses.

Environment encodings are N-particle product states kept per particle, so
overlaps are products of single-particle overlaps and N can be large.
Ratios are carried as base-10 logarithms to survive N in the thousands.
"""

from __future__ import annotations

import io
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

NORM_TOL = 1e-12


class CollapseError(ValueError):
    pass


class MacroscopicCoreError(CollapseError):
    """Collapse would consume every particle (n >= N)."""


class _Divergent:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIVERGENT"

    def __str__(self):
        return "divergent"


DIVERGENT = _Divergent()
"""Sentinel for a ratio that diverges (a vanishing overlap in the denominator)."""


@dataclass(frozen=True, eq=False)
class ProductEnvironment:
    """Per-particle states of the two encodings, shape (N, 2) each."""

    branch1: np.ndarray
    branch2: np.ndarray

    def __post_init__(self):
        e1 = np.atleast_2d(np.asarray(self.branch1, dtype=complex))
        e2 = np.atleast_2d(np.asarray(self.branch2, dtype=complex))
        if e1.shape != e2.shape or e1.ndim != 2 or e1.shape[1] != 2:
            raise ValueError("encodings must both have shape (N, 2)")
        if e1.shape[0] < 1:
            raise ValueError("N must be at least 1")
        for e in (e1, e2):
            if np.max(np.abs(np.linalg.norm(e, axis=1) - 1)) > NORM_TOL:
                raise ValueError("per-particle states must be normalized")
            e.setflags(write=False)
        object.__setattr__(self, "branch1", e1)
        object.__setattr__(self, "branch2", e2)

    @classmethod
    def uniform(cls, N: int, c: complex) -> "ProductEnvironment":
        """e1 = |0>, e2 = c|0> + sqrt(1-|c|^2)|1>, so each <e1|e2> = c."""
        if abs(c) > 1:
            raise ValueError("overlap magnitude must not exceed 1")
        e1 = np.tile([1, 0], (N, 1)).astype(complex)
        e2 = np.tile([c, np.sqrt(1 - abs(c) ** 2)], (N, 1)).astype(complex)
        return cls(e1, e2)

    @property
    def N(self) -> int:
        return self.branch1.shape[0]

    def overlaps(self) -> np.ndarray:
        """<e1^(j)|e2^(j)> for every particle j."""
        return np.einsum("ji,ji->j", self.branch1.conj(), self.branch2)

    def dense(self, branch: int) -> np.ndarray:
        rows = self.branch1 if branch == 1 else self.branch2
        out = np.array([1.0 + 0j])
        for r in rows:
            out = np.kron(out, r)
        return out

    def without(self, indices: Iterable[int]) -> "ProductEnvironment":
        keep = np.setdiff1d(np.arange(self.N), np.asarray(list(indices), dtype=int))
        return ProductEnvironment(self.branch1[keep], self.branch2[keep])


@dataclass(frozen=True, eq=False)
class CollapseRecord:
    """Particles ``indices`` collapse onto ``targets`` (one state per particle)."""

    indices: tuple[int, ...]
    targets: np.ndarray

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        t = np.asarray(self.targets, dtype=complex).reshape(len(idx), 2)
        if len(idx) and np.max(np.abs(np.linalg.norm(t, axis=1) - 1)) > NORM_TOL:
            raise ValueError("collapse targets must be normalized")
        if len(set(idx)) != len(idx):
            raise CollapseError("collapsed particle indices must be distinct")
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)

    @property
    def n(self) -> int:
        return len(self.indices)

    @classmethod
    def toward_branch1(cls, env: ProductEnvironment, indices: Sequence[int]) -> "CollapseRecord":
        return cls(tuple(indices), env.branch1[list(indices)])

    @classmethod
    def symmetric(cls, env: ProductEnvironment, indices: Sequence[int]) -> "CollapseRecord":
        """Targets along e1 + e2, giving gamma_1 = gamma_2 when <e1|e2> is real."""
        idx = list(indices)
        t = env.branch1[idx] + env.branch2[idx]
        return cls(tuple(idx), t / np.linalg.norm(t, axis=1, keepdims=True))

    def gammas(self, env: ProductEnvironment) -> tuple[np.ndarray, np.ndarray]:
        idx = list(self.indices)
        g1 = np.einsum("ji,ji->j", self.targets.conj(), env.branch1[idx])
        g2 = np.einsum("ji,ji->j", self.targets.conj(), env.branch2[idx])
        return g1, g2


@dataclass(frozen=True, eq=False)
class CollapseResult:
    survivors: ProductEnvironment
    factors: tuple[complex, complex]
    log10_abs_factors: tuple[float, float]


def _log10_abs_prod(values: np.ndarray) -> float:
    mags = np.abs(values)
    if np.any(mags == 0):
        return -np.inf
    return float(np.sum(np.log10(mags)))


def _validate(env: ProductEnvironment, rec: CollapseRecord):
    if rec.n >= env.N:
        raise MacroscopicCoreError(
            f"collapsing {rec.n} of {env.N} particles leaves no macroscopic core"
        )
    if any(i < 0 or i >= env.N for i in rec.indices):
        raise CollapseError("collapse index out of range")
    g1, _ = rec.gammas(env)
    if np.any(g1 == 0):
        raise CollapseError("a collapse target is orthogonal to the realized encoding (gamma_1 = 0)")


def collapse_environment(env: ProductEnvironment, rec: CollapseRecord) -> CollapseResult:
    """Remove the collapsed particles and accumulate prod_j gamma_i^(j) per encoding."""
    _validate(env, rec)
    if rec.n == 0:
        return CollapseResult(env, (1 + 0j, 1 + 0j), (0.0, 0.0))
    g1, g2 = rec.gammas(env)
    return CollapseResult(
        env.without(rec.indices),
        (complex(np.prod(g1)), complex(np.prod(g2))),
        (_log10_abs_prod(g1), _log10_abs_prod(g2)),
    )


def environment_overlap(env: ProductEnvironment) -> complex:
    """<eps_1|eps_2> as the product of per-particle overlaps."""
    return complex(np.prod(env.overlaps()))


def log10_abs_overlap(env: ProductEnvironment) -> float:
    return _log10_abs_prod(env.overlaps())


@dataclass(frozen=True)
class RobustnessRatio:
    """Pr(Right)/Pr(Wrong), exact and with the gamma products dropped.

    ``None`` logs mean the corresponding value diverges.
    """

    log10_exact: Optional[float]
    log10_approx: Optional[float]

    @property
    def divergent(self) -> bool:
        return self.log10_exact is None

    @property
    def exact(self):
        return DIVERGENT if self.log10_exact is None else 10.0**self.log10_exact

    @property
    def approx(self):
        return DIVERGENT if self.log10_approx is None else 10.0**self.log10_approx


def robustness_ratio(env_before: ProductEnvironment, rec: CollapseRecord) -> RobustnessRatio:
    """prod gamma_1 / (|<eps_1(N-n)|eps_2(N-n)>|^2 prod gamma_2), magnitudes taken."""
    res = collapse_environment(env_before, rec)
    log_ov = log10_abs_overlap(res.survivors)
    approx = None if log_ov == -np.inf else -2 * log_ov
    lg1, lg2 = res.log10_abs_factors
    exact = None if approx is None or lg2 == -np.inf else lg1 + approx - lg2
    return RobustnessRatio(exact, approx)


@dataclass(frozen=True)
class DecayModel:
    N0: float
    T: float

    def __post_init__(self):
        if self.N0 < 1:
            raise ValueError("N0 must be at least 1")
        if not self.T > 0:
            raise ValueError("lifetime T must be positive")


def decay_population(model: DecayModel, t: float) -> float:
    """N(t) = N0 exp(-t/T)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return model.N0 * float(np.exp(-t / model.T))


def decay_rate(model: DecayModel, t: float) -> float:
    """dN/dt, never positive."""
    return -decay_population(model, t) / model.T


@dataclass(frozen=True)
class SweepRow:
    c: float
    N: int
    n: int
    log10_ratio_exact: Optional[float]
    log10_ratio_approx: Optional[float]


DEFAULT_GRID = {"c": (0.3, 0.5, 0.9), "N": (10, 100, 1000), "n": (0, 1, 5)}

SWEEP_COLUMNS = ("c", "N", "n", "log10_ratio_exact", "log10_ratio_approx")


def _sweep_point(args) -> SweepRow:
    c, N, n, collapse = args
    env = ProductEnvironment.uniform(N, c)
    idx = range(n)
    rec = CollapseRecord.symmetric(env, idx) if collapse == "symmetric" else CollapseRecord.toward_branch1(env, idx)
    r = robustness_ratio(env, rec)
    return SweepRow(float(c), int(N), int(n), r.log10_exact, r.log10_approx)


def sweep_robustness(
    c_grid: Sequence[float] = DEFAULT_GRID["c"],
    N_grid: Sequence[int] = DEFAULT_GRID["N"],
    n_grid: Sequence[int] = DEFAULT_GRID["n"],
    collapse: str = "symmetric",
    jobs: int = 1,
) -> list[SweepRow]:
    """Log-ratio table over a uniform-overlap grid, rows ordered by (c, N, n).

    ``collapse`` picks the collapse targets: "symmetric" (gamma_1 = gamma_2)
    or "branch1" (targets equal to the realized encoding).
    """
    if not (len(c_grid) and len(N_grid) and len(n_grid)):
        raise ValueError("sweep grids must be nonempty")
    if collapse not in ("symmetric", "branch1"):
        raise ValueError(f"unknown collapse mode {collapse!r}")
    points = [(c, N, n, collapse) for c in c_grid for N in N_grid for n in n_grid]
    for _, N, n, _ in points:
        if n >= N:
            raise MacroscopicCoreError(f"grid point n={n} is not below N={N}")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, points))
    return [_sweep_point(p) for p in points]


def fit_scaling(rows: Sequence[SweepRow]) -> dict[float, tuple[float, float, float]]:
    """Per c: (slope, intercept, max |residual|) of log10 ratio against N - n."""
    out = {}
    for c in sorted({r.c for r in rows}):
        pts = [(r.N - r.n, r.log10_ratio_exact) for r in rows if r.c == c and r.log10_ratio_exact is not None]
        if len(pts) < 2:
            continue
        x, y = np.array(pts, dtype=float).T
        slope, intercept = np.polyfit(x, y, 1)
        out[c] = (float(slope), float(intercept), float(np.max(np.abs(y - (slope * x + intercept)))))
    return out


def _fmt(v: Optional[float]) -> str:
    return "divergent" if v is None else repr(float(v))


def sweep_rows_as_records(rows: Sequence[SweepRow]) -> list[tuple]:
    return [(repr(r.c), str(r.N), str(r.n), _fmt(r.log10_ratio_exact), _fmt(r.log10_ratio_approx)) for r in rows]


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    writer.writerows(sweep_rows_as_records(rows))
    return buf.getvalue()
