"""Command-line driver.

Commands
--------
study-uniform    dyadic refinement study, emits table1.csv / table1.md
study-adaptive   adaptive refinement study, emits table2.csv / table2.md
solve            one solve plus interior evaluations on a point list
check-invariants cross-check battery over the whole pipeline

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import mesh as mesh_mod
from .galerkin import assemble_all, assemble_rhs, write_matrix_text
from .kernels import QuadratureError
from .krylov import NumericalError
from .studies import (
    ConfigError,
    ExperimentConfig,
    PRECOND_CHOICES,
    build_problem,
    meta_text,
    records_to_csv,
    records_to_markdown,
    run_adaptive_study,
    run_single_solve,
    run_uniform_study,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--example", type=int, choices=(1, 2), default=None,
                   help="built-in problem: 1 smooth datum, 2 boundary layer")
    p.add_argument("--alpha", type=float, default=None, help="heat capacity (default 1)")
    p.add_argument("--levels", type=int, default=None,
                   help="refinement levels (uniform) or steps (adaptive)")
    p.add_argument("--tol", type=float, default=None, help="GMRES relative tolerance")
    p.add_argument("--precond", choices=(*PRECOND_CHOICES, "all"), default=None,
                   help="preconditioner set for iteration counts")
    p.add_argument("--theta", type=float, default=None, help="marking parameter in (0, 1]")
    p.add_argument("--out", type=Path, default=None, help="output directory (default results/)")
    p.add_argument("--dump-matrices", action="store_true",
                   help="write V/D/rhs plain-text dumps per level")
    p.add_argument("--kappa", choices=("sv", "eig", "both"), default=None,
                   help="condition-number convention for the tables")
    p.add_argument("--max-kappa-n", type=int, default=None,
                   help="skip condition numbers above this system size")
    p.add_argument("--config", type=Path, default=None,
                   help="key=value file; explicit flags override it")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="heatbem",
        description="Space-time boundary element studies for the 1D heat equation",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_uni = sub.add_parser("study-uniform", help="dyadic refinement study")
    _common_flags(p_uni)

    p_ada = sub.add_parser("study-adaptive", help="adaptive refinement study")
    _common_flags(p_ada)
    p_ada.add_argument("--target-n", type=int, default=None,
                       help="stop after the first step whose N exceeds this")
    p_ada.add_argument("--max-steps", type=int, default=None)

    p_sol = sub.add_parser("solve", help="single solve with interior samples")
    _common_flags(p_sol)
    p_sol.add_argument("--level", type=int, default=4, help="uniform mesh level")
    p_sol.add_argument("--points", type=str, default="",
                       help="interior points 'x,t;x,t;...'")

    p_chk = sub.add_parser("check-invariants", help="run the cross-check battery")
    p_chk.add_argument("--seed", type=int, default=1234)
    return ap


def _load_config_file(path: Path) -> dict:
    table = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line (need key=value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        table[key] = value
    return table


_CONFIG_KEYS = {
    "example": int,
    "alpha": float,
    "levels": int,
    "tol": float,
    "precond": str,
    "theta": str,
    "kappa": str,
    "max_kappa_n": int,
    "target_n": int,
    "max_steps": int,
}


def _build_config(args: argparse.Namespace, adaptive: bool) -> ExperimentConfig:
    base: dict = {}
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file not found: {args.config}")
        raw = _load_config_file(args.config)
        unknown = set(raw) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, text in raw.items():
            try:
                base[key] = _CONFIG_KEYS[key](text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {text!r}") from exc

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return base.get(key, default)

    precond = pick(args.precond, "precond", "all")
    preconds = PRECOND_CHOICES if precond == "all" else (precond,)
    cfg = ExperimentConfig(
        example=pick(args.example, "example", 1),
        alpha=pick(args.alpha, "alpha", 1.0),
        max_level=pick(args.levels, "levels", 8),
        tol=pick(args.tol, "tol", 1e-8),
        preconds=preconds,
        theta=float(pick(args.theta, "theta", 0.5)),
        kappa_convention=pick(args.kappa, "kappa", "sv"),
        max_kappa_n=pick(args.max_kappa_n, "max_kappa_n", 1024),
        target_n=pick(getattr(args, "target_n", None), "target_n", 278),
        max_steps=pick(getattr(args, "max_steps", None), "max_steps", 80),
    )
    cfg.validate(adaptive=adaptive)
    return cfg


def _out_dir(args: argparse.Namespace) -> Path:
    out = args.out if args.out is not None else Path("results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_level(out: Path, mesh, problem, tag: str) -> None:
    mats = assemble_all(mesh, problem.params)
    write_matrix_text(out / f"V_{tag}.txt", mats.V)
    write_matrix_text(out / f"D_{tag}.txt", mats.D)
    write_matrix_text(out / f"rhs_{tag}.txt", assemble_rhs(mesh, problem))


def _write_study(out, cfg, records, meshes, style, table_name, command, dump, problem):
    (out / f"{table_name}.csv").write_text(records_to_csv(records))
    convention = "eig" if cfg.kappa_convention == "eig" else "sv"
    (out / f"{table_name}.md").write_text(
        records_to_markdown(records, style=style, convention=convention)
    )
    (out / "meta.txt").write_text(meta_text(cfg, command))
    for rec, m in zip(records, meshes):
        (out / f"mesh_L{rec.level}.txt").write_text(mesh_mod.dumps(m))
        if dump:
            _dump_level(out, m, problem, f"L{rec.level}")


def _cmd_study_uniform(args) -> int:
    cfg = _build_config(args, adaptive=False)
    out = _out_dir(args)
    problem, _ = build_problem(cfg)
    records, meshes = run_uniform_study(cfg)
    _write_study(out, cfg, records, meshes, "uniform", "table1",
                 "study-uniform", args.dump_matrices, problem)
    sys.stdout.write(records_to_markdown(records, style="uniform"))
    return EXIT_OK


def _cmd_study_adaptive(args) -> int:
    cfg = _build_config(args, adaptive=True)
    if args.levels is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "max_steps": args.levels})
        cfg.validate(adaptive=True)
    out = _out_dir(args)
    problem, _ = build_problem(cfg)
    records, meshes = run_adaptive_study(cfg)
    _write_study(out, cfg, records, meshes, "adaptive", "table2",
                 "study-adaptive", args.dump_matrices, problem)
    sys.stdout.write(records_to_markdown(records, style="adaptive"))
    return EXIT_OK


def _parse_points(text: str):
    pts = []
    if not text.strip():
        return pts
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad point {chunk!r}; expected 'x,t'")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"bad point {chunk!r}: {exc}") from exc
    return pts


def _cmd_solve(args) -> int:
    cfg = _build_config(args, adaptive=False)
    points = _parse_points(args.points)
    out = _out_dir(args)
    result = run_single_solve(cfg, args.level, points)
    tag = f"L{args.level}"
    (out / f"mesh_{tag}.txt").write_text(mesh_mod.dumps(result.mesh))
    flux_lines = [
        f"{el.side.value} {el.t_begin:.17g} {el.t_end:.17g} "
        f"{result.flux.coefficients[el.index]:.17g}"
        for el in result.mesh.elements()
    ]
    (out / f"flux_{tag}.txt").write_text("\n".join(flux_lines) + "\n")
    (out / "meta.txt").write_text(meta_text(cfg, "solve"))
    if args.dump_matrices:
        problem, _ = build_problem(cfg)
        _dump_level(out, result.mesh, problem, tag)
    if result.interior_samples:
        rows = ["x,t,u_h,u_reference,abs_error"]
        for x, t, uh, uref in result.interior_samples:
            rows.append(
                f"{x:.17g},{t:.17g},{uh:.17g},{uref:.17g},{abs(uh - uref):.17g}"
            )
        (out / "interior.csv").write_text("\n".join(rows) + "\n")
        sys.stdout.write("\n".join(rows) + "\n")
    sys.stdout.write(
        f"solved N={result.mesh.n_elements} in {result.iterations} iterations\n"
    )
    return EXIT_OK


def _cmd_check_invariants(args) -> int:
    from .verification import run_invariant_battery

    results = run_invariant_battery(rng_seed=args.seed)
    failed = 0
    for res in results:
        mark = "ok" if res["ok"] else "FAIL"
        detail = f"  ({res['detail']})" if res["detail"] else ""
        sys.stdout.write(f"[{mark:>4}] {res['name']}{detail}\n")
        failed += 0 if res["ok"] else 1
    if failed:
        sys.stdout.write(f"{failed} invariant check(s) failed\n")
        return EXIT_NUMERICAL
    sys.stdout.write(f"all {len(results)} invariant checks passed\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {
        "study-uniform": _cmd_study_uniform,
        "study-adaptive": _cmd_study_adaptive,
        "solve": _cmd_solve,
        "check-invariants": _cmd_check_invariants,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (NumericalError, QuadratureError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
