"""Mesh-refinement studies: mode matching, order fitting and extrapolation.

Each mode's frequencies over the levels are fitted to ``omega_h = omega + C h**alpha``
by a one-dimensional search over alpha with the linear part solved exactly.
"""

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import build_lame
from .mesh import DomainKind, DomainSpec, generate_mesh
from .spectral import CLUSTER_RTOL, DEFAULT_SHIFT, solve

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ALPHA_BOUNDS = (0.25, 8.0)
PLATEAU_RTOL = 1e-9
SATURATION_RTOL = 1e-8
WORKERS_ENV = "PSEUDOSTRESS_WORKERS"
CSV_COLUMNS = ("nu", "k", "mode", "N", "h", "omega", "alpha", "omega_extr", "rel_err")


class StudyError(RuntimeError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    domain: DomainSpec
    nus: tuple
    ks: tuple
    Ns: tuple
    E: float = 1.0
    nev: int = 4
    match_rtol: float = CLUSTER_RTOL
    shift: float = DEFAULT_SHIFT

    def __post_init__(self):
        dom = self.domain if isinstance(self.domain, DomainSpec) else DomainSpec.parse(self.domain)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "nus", tuple(float(v) for v in self.nus))
        object.__setattr__(self, "ks", tuple(int(v) for v in self.ks))
        object.__setattr__(self, "Ns", tuple(int(v) for v in self.Ns))
        if dom.kind == DomainKind.IMPORTED:
            raise ValueError("refinement studies need a generated domain, not an imported mesh")
        if len(self.Ns) < 3:
            raise ValueError(f"a study needs at least 3 mesh levels, got {len(self.Ns)}")
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])) or self.Ns[0] < 1:
            raise ValueError(f"N list must be positive and strictly increasing, got {list(self.Ns)}")
        if not self.nus or not self.ks:
            raise ValueError("nu and k lists must be non-empty")
        for nu in self.nus:
            build_lame(self.E, nu)
        for k in self.ks:
            if k not in (0, 1, 2):
                raise ValueError(f"unsupported polynomial order k={k}")
        if self.nev < 1:
            raise ValueError(f"nev must be positive, got {self.nev}")

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.kind.value,
            "nu": list(self.nus),
            "k": list(self.ks),
            "N": list(self.Ns),
            "E": self.E,
            "nev": self.nev,
            "match_rtol": self.match_rtol,
            "shift": self.shift,
        }


@dataclass(frozen=True)
class OrderFit:
    alpha: float
    omega_extr: float
    C: float
    residual: float
    levels_used: int
    saturated: bool = False
    monotone: bool = True


def _design(h, alpha):
    return np.column_stack([np.ones_like(h), h**alpha])


def _linear_fit(h, w, alpha):
    X = _design(h, alpha)
    coef, *_ = np.linalg.lstsq(X, w, rcond=None)
    r = w - X @ coef
    return coef, float(r @ r)


def _golden(f, a, b, tol=1e-12, maxiter=200):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def fit_order(h, omega, bounds=ALPHA_BOUNDS) -> OrderFit:
    """Least-squares fit of omega_h = omega + C h**alpha.

    Levels whose frequency moved by less than PLATEAU_RTOL relative to the
    previous (coarser) level are dropped before fitting; the fit is flagged
    as saturated when that happens or when the finest level already agrees
    with the extrapolate to SATURATION_RTOL.
    """
    h = np.asarray(h, dtype=float)
    w = np.asarray(omega, dtype=float)
    if h.shape != w.shape or h.ndim != 1:
        raise ValueError("h and omega must be 1-D arrays of equal length")
    if len(h) < 3:
        raise ValueError(f"fit needs at least 3 levels, got {len(h)}")
    order = np.argsort(-h, kind="stable")
    h, w = h[order], w[order]
    diffs = np.diff(w)
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))

    keep = np.ones(len(h), dtype=bool)
    keep[1:] = np.abs(diffs) >= PLATEAU_RTOL * np.abs(w[1:])
    plateau = not keep.all()
    if keep.sum() < 3:
        keep[:] = True
    hs, ws = h[keep], w[keep]
    # scale h to O(1) so h**alpha stays well conditioned over the alpha range
    href = hs.max()
    x = hs / href

    def ssr(a):
        return _linear_fit(x, ws, a)[1]

    grid = np.linspace(bounds[0], bounds[1], 64)
    vals = [ssr(a) for a in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    alpha, best = _golden(ssr, lo, hi)
    coef, best = _linear_fit(x, ws, alpha)
    omega_extr, c_scaled = float(coef[0]), float(coef[1])
    C = c_scaled / href**alpha
    finest_err = abs(w[-1] - omega_extr) / abs(omega_extr) if omega_extr != 0 else math.inf
    saturated = plateau or finest_err < SATURATION_RTOL
    return OrderFit(
        alpha=float(alpha),
        omega_extr=omega_extr,
        C=float(C),
        residual=math.sqrt(best),
        levels_used=int(keep.sum()),
        saturated=bool(saturated),
        monotone=monotone,
    )


def _frequencies(sol):
    if hasattr(sol, "frequencies"):
        return np.asarray(sol.frequencies)
    return np.asarray(sol, dtype=float)


def match_modes(solutions, nev: int, rtol: float = CLUSTER_RTOL) -> np.ndarray:
    """Frequencies aligned by ascending index, shape (n_levels, nev).

    Values inside a multiplicity cluster (relative gap below ``rtol``) are
    sorted, so repeated frequencies stay aligned whatever order the solver
    returned them in.
    """
    out = np.empty((len(solutions), nev))
    for lvl, sol in enumerate(solutions):
        w = np.sort(_frequencies(sol), kind="stable")
        if len(w) < nev:
            raise StudyError(f"level {lvl} has {len(w)} modes, {nev} requested")
        out[lvl] = w[:nev]
    return out


@dataclass
class ModeSeries:
    nu: float
    k: int
    mode: int  # 1-based
    N: tuple
    h: np.ndarray
    omega: np.ndarray
    fit: OrderFit

    @property
    def rel_err(self) -> np.ndarray:
        return np.abs(self.omega - self.fit.omega_extr) / abs(self.fit.omega_extr)


@dataclass
class ConvergenceReport:
    config: StudyConfig
    series: list = field(default_factory=list)

    def block(self, nu, k) -> list:
        return [s for s in self.series if s.nu == nu and s.k == k]

    def to_records(self) -> list:
        rows = []
        for s in self.series:
            alpha = None if s.fit.saturated else s.fit.alpha
            for N, h, w, e in zip(s.N, s.h, s.omega, s.rel_err):
                rows.append(dict(nu=s.nu, k=s.k, mode=s.mode, N=N, h=float(h), omega=float(w), alpha=alpha,
                                 omega_extr=s.fit.omega_extr, rel_err=float(e)))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        buf.write("# config=" + json.dumps(self.config.to_dict(), sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.to_records():
            writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        series = []
        for s in self.series:
            f = s.fit
            series.append({
                "nu": s.nu,
                "k": s.k,
                "mode": s.mode,
                "N": list(s.N),
                "h": s.h.tolist(),
                "omega": s.omega.tolist(),
                "alpha": None if f.saturated else f.alpha,
                "alpha_raw": f.alpha,
                "omega_extr": f.omega_extr,
                "C": f.C,
                "fit_residual": f.residual,
                "levels_used": f.levels_used,
                "saturated": f.saturated,
                "monotone": f.monotone,
                "rel_err": s.rel_err.tolist(),
            })
        doc = {"schema_version": SCHEMA_VERSION, "config": self.config.to_dict(), "series": series}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def format_table(self, nu, k) -> str:
        rows = self.block(nu, k)
        if not rows:
            raise KeyError(f"no results for nu={nu}, k={k}")
        Ns = rows[0].N
        head = ["Mode"] + [f"N={N}" for N in Ns] + ["Order", "Extr."]
        lines = [f"nu = {nu:g}, k = {k}", "  ".join(f"{c:>9}" for c in head)]
        for s in rows:
            order = "sat." if s.fit.saturated else f"{s.fit.alpha:.2f}"
            cells = [f"w{s.mode}"] + [f"{w:.5f}" for w in s.omega] + [order, f"{s.fit.omega_extr:.5f}"]
            lines.append("  ".join(f"{c:>9}" for c in cells))
        return "\n".join(lines)

    def format_tables(self) -> str:
        return "\n\n".join(self.format_table(nu, k) for nu in self.config.nus for k in self.config.ks) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _solve_cell(domain, N, k, E, nu, nev, shift):
    try:
        mesh = generate_mesh(domain, N)
        sol = solve(mesh, k, build_lame(E, nu), nev, shift)
    except Exception as exc:
        raise StudyError(f"nu={nu}, k={k}, N={N}: {exc}") from exc
    return mesh.h, sol.frequencies


def study_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


def run_study(config: StudyConfig, workers: int | None = None) -> ConvergenceReport:
    """Solve every (nu, k, N) cell, then match modes and fit each mode per (nu, k)."""
    workers = study_workers() if workers is None else max(int(workers), 1)
    cells = [(nu, k, N) for nu in config.nus for k in config.ks for N in config.Ns]
    args = [(config.domain, N, k, config.E, nu, config.nev, config.shift) for nu, k, N in cells]
    if workers == 1:
        results = [_solve_cell(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_cell, *zip(*args)))
    by_cell = dict(zip(cells, results))

    report = ConvergenceReport(config=config)
    for nu in config.nus:
        for k in config.ks:
            hs = np.array([by_cell[nu, k, N][0] for N in config.Ns])
            table = match_modes([by_cell[nu, k, N][1] for N in config.Ns], config.nev, config.match_rtol)
            for i in range(config.nev):
                fit = fit_order(hs, table[:, i])
                if not fit.monotone:
                    log.warning("nu=%g k=%d mode %d: non-monotone frequencies", nu, k, i + 1)
                report.series.append(ModeSeries(nu=nu, k=k, mode=i + 1, N=config.Ns, h=hs, omega=table[:, i], fit=fit))
    return report


def relative_errors(report: ConvergenceReport, s: float = math.inf) -> list:
    """Plot-ready rows (nu, k, mode, N, h, rel_err, ref) per mode and level.

    ``ref`` is the reference line h**(2 min(s, k+1)) anchored at the finest level.
    """
    rows = []
    for ser in report.series:
        if ser.fit.omega_extr == 0:
            raise ValueError("zero extrapolated frequency")
        e = ser.rel_err
        rate = 2.0 * min(s, ser.k + 1)
        ref = e[-1] * (ser.h / ser.h[-1]) ** rate
        for N, h, ei, ri in zip(ser.N, ser.h, e, ref):
            rows.append(dict(nu=ser.nu, k=ser.k, mode=ser.mode, N=N, h=float(h), rel_err=float(ei), ref=float(ri),
                             rate=rate))
    return rows
