"""Command-line front end: single solves, refinement studies, mesh and matrix export."""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import analysis
from .assembly import assemble_system, build_lame, dump_matrices
from .export import solution_csv, solution_json, vertex_displacement, write_vtk
from .mesh import DomainKind, DomainSpec, MeshError, export_mesh, generate_mesh, import_mesh
from .spectral import DEFAULT_SHIFT, EigenSolverError, solve

log = logging.getLogger("pseudostress")

FORMATS = ("csv", "json", "vtk")
EXIT_INVALID = 2
EXIT_FAILED = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    domain: str = "square"
    mesh_file: str | None = None
    nu: list = field(default_factory=lambda: [0.35])
    E: float = 1.0
    k: list = field(default_factory=lambda: [0])
    N: list = field(default_factory=lambda: [10])
    nev: int = 4
    shift: float = DEFAULT_SHIFT
    out: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    plots: bool = True
    workers: int | None = None

    def validate(self):
        try:
            self.spec = DomainSpec.parse(self.domain, self.mesh_file)
        except MeshError as exc:
            raise ConfigError(str(exc)) from None
        if self.spec.kind is DomainKind.IMPORTED and self.command == "study":
            raise ConfigError("study needs a generated domain")
        if self.mesh_file is not None and self.spec.kind is not DomainKind.IMPORTED:
            raise ConfigError("--mesh-file requires --domain imported")
        for nu in self.nu:
            try:
                build_lame(self.E, nu)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for k in self.k:
            if k not in (0, 1, 2):
                raise ConfigError(f"unsupported polynomial order k={k}; expected 0, 1 or 2")
        if any(n < 1 for n in self.N):
            raise ConfigError(f"N must be positive, got {self.N}")
        if self.nev < 1:
            raise ConfigError(f"nev must be positive, got {self.nev}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown output formats {bad}; choose from {list(FORMATS)}")
        if self.command == "study":
            try:
                self.study_config()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        elif len(self.nu) != 1 or len(self.k) != 1 or len(self.N) != 1:
            raise ConfigError(f"{self.command} takes a single nu, k and N")
        return self

    def study_config(self):
        return analysis.StudyConfig(self.spec, tuple(self.nu), tuple(self.k), tuple(self.N), E=self.E, nev=self.nev,
                                    shift=self.shift)

    def resolved(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return d


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _formats(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudostress", description="Mixed RT/P_k elasticity eigensolver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lists=False):
        sp.add_argument("--domain", default="square", choices=[k.value for k in DomainKind])
        sp.add_argument("--mesh-file", default=None)
        sp.add_argument("--nu", type=_float_list, default=[0.35], help="Poisson ratio" + (" list" if lists else ""))
        sp.add_argument("--E", type=float, default=1.0, help="Young's modulus")
        sp.add_argument("--k", type=_int_list, default=[0], help="RT order" + (" list" if lists else ""))
        sp.add_argument("--N", type=_int_list, default=[10], help="refinement" + (" list" if lists else ""))
        sp.add_argument("--out", default="out")

    s = sub.add_parser("solve", help="solve one eigenproblem")
    common(s)
    s.add_argument("--nev", type=int, default=4)
    s.add_argument("--shift", type=float, default=DEFAULT_SHIFT)
    s.add_argument("--formats", type=_formats, default=["csv", "json"])
    s.add_argument("--no-plots", dest="plots", action="store_false")

    st = sub.add_parser("study", help="mesh-refinement convergence study")
    common(st, lists=True)
    st.add_argument("--nev", type=int, default=4)
    st.add_argument("--shift", type=float, default=DEFAULT_SHIFT)
    st.add_argument("--formats", type=_formats, default=["csv", "json"])
    st.add_argument("--no-plots", dest="plots", action="store_false")
    st.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${analysis.WORKERS_ENV} or 1)")

    em = sub.add_parser("export-mesh", help="write a generated mesh in the ASCII mesh format")
    common(em)

    dm = sub.add_parser("dump-matrices", help="write A, B, M, c in MatrixMarket format")
    common(dm)
    return p


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, domain=args.domain, mesh_file=args.mesh_file, nu=args.nu, E=args.E,
                    k=args.k, N=args.N, out=args.out)
    for name in ("nev", "shift", "formats", "plots", "workers"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg.validate()


def _mesh(cfg):
    if cfg.spec.kind is DomainKind.IMPORTED:
        return import_mesh(cfg.spec.path)
    return generate_mesh(cfg.spec, cfg.N[0])


def cmd_solve(cfg: RunConfig) -> list:
    out = Path(cfg.out)
    mesh = _mesh(cfg)
    k = cfg.k[0]
    material = build_lame(cfg.E, cfg.nu[0])
    sol = solve(mesh, k, material, cfg.nev, cfg.shift)
    out.mkdir(parents=True, exist_ok=True)
    conf = cfg.resolved()
    written = []
    if "json" in cfg.formats:
        written.append(out / "solution.json")
        written[-1].write_text(solution_json(sol, conf))
    if "csv" in cfg.formats:
        written.append(out / "frequencies.csv")
        written[-1].write_text(solution_csv(sol, conf))
    dofmap = sol.system.dofmap
    if "vtk" in cfg.formats:
        fields = {f"u_mode{i + 1}": vertex_displacement(mesh, k, sol.u[i], dofmap) for i in range(len(sol))}
        title = "config " + json.dumps(conf, sort_keys=True)
        written.append(write_vtk(out / "modes.vtk", mesh, fields, title))
    if cfg.plots:
        from .plotting import plot_displacement_magnitude

        for i in range(len(sol)):
            written.append(plot_displacement_magnitude(
                mesh, k, sol.u[i], out / f"mode{i + 1}.png", title=f"|u_h|, mode {i + 1}, omega = {sol.frequencies[i]:.5f}",
                dofmap=dofmap))
    for i, w in enumerate(sol.frequencies):
        print(f"mode {i + 1}: omega = {w:.6f}")
    return written


def cmd_study(cfg: RunConfig) -> list:
    out = Path(cfg.out)
    report = analysis.run_study(cfg.study_config(), workers=cfg.workers)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in cfg.formats:
        written.append(out / "study.csv")
        written[-1].write_text(report.to_csv())
    if "json" in cfg.formats:
        written.append(out / "study.json")
        written[-1].write_text(report.to_json())
    table = report.format_tables()
    (out / "study.txt").write_text(table)
    written.append(out / "study.txt")
    if cfg.plots:
        from .plotting import plot_relative_errors

        rows = analysis.relative_errors(report)
        for nu in cfg.nu:
            for k in cfg.k:
                sel = [r for r in rows if r["nu"] == nu and r["k"] == k]
                written.append(plot_relative_errors(sel, out / f"relerr_nu{nu:g}_k{k}.png",
                                                    title=f"{cfg.domain}, nu = {nu:g}, k = {k}"))
    print(table, end="")
    return written


def cmd_export_mesh(cfg: RunConfig) -> list:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.domain}_N{cfg.N[0]}.mesh"
    export_mesh(_mesh(cfg), path)
    return [path]


def cmd_dump_matrices(cfg: RunConfig) -> list:
    system = assemble_system(_mesh(cfg), cfg.k[0], build_lame(cfg.E, cfg.nu[0]))
    return dump_matrices(system, cfg.out)


COMMANDS = {"solve": cmd_solve, "study": cmd_study, "export-mesh": cmd_export_mesh, "dump-matrices": cmd_dump_matrices}


def _error(kind, stage, exc, code):
    record = {"error": kind, "stage": stage, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        return _error("invalid_config", "validate", exc, EXIT_INVALID)
    try:
        written = COMMANDS[cfg.command](cfg)
    except (MeshError, EigenSolverError, analysis.StudyError, ValueError, OSError, RuntimeError) as exc:
        return _error("run_failed", cfg.command, exc, EXIT_FAILED)
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
