"""Command-line front end binding run configurations to the experiment
drivers.

Step sizes accept the literal dyadic form ``2^-k`` so grids stay exact.
A flat key=value config file can seed any flag; explicit flags win.
Validation failures exit with status 2 and a single ``error:`` line on
stderr.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import harness, noise, problems
from .integrators import METHODS


def parse_h(text: str) -> float:
    """Step size as a decimal or a dyadic literal like 2^-6."""
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        if base.strip() != "2":
            raise argparse.ArgumentTypeError(f"unsupported step-size base in {text!r}")
        try:
            return 2.0 ** int(exp)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad dyadic exponent in {text!r}") from None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad step size {text!r}") from None


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


_CONFIG_PARSERS = {
    "problem": str,
    "methods": str,
    "method": str,
    "h": parse_h,
    "T": float,
    "paths": int,
    "levels": int,
    "seed": int,
    "threads": int,
    "normalize": _parse_bool,
    "include_diagonal_half": _parse_bool,
    "ode_substeps": int,
    "dexpinv_order": int,
    "out": str,
    "deterministic": _parse_bool,
}


def read_config_file(path: str) -> dict:
    """Flat key=value lines; blank lines and #-comments ignored."""
    values = {}
    try:
        with open(path) as f:
            for lineno, raw in enumerate(f, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, val = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in _CONFIG_PARSERS:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _CONFIG_PARSERS[key](val.strip())
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    return values


def _add_common(parser: argparse.ArgumentParser, default_methods: str) -> None:
    parser.add_argument("--problem", default="rigidbody", choices=problems.PROBLEM_NAMES)
    parser.add_argument("--method", dest="methods", metavar="ID",
                        default=argparse.SUPPRESS,
                        help="single method id (alias for --methods)")
    parser.add_argument("--methods", dest="methods", default=default_methods,
                        metavar="ID[,ID...]",
                        help=f"comma-separated method ids from {sorted(METHODS)}")
    parser.add_argument("--h", type=parse_h, default=2.0**-4,
                        help="step size; accepts 2^-k literals")
    parser.add_argument("--T", type=float, default=1.0, help="time horizon")
    parser.add_argument("--paths", type=int, default=100)
    parser.add_argument("--levels", type=int, default=1,
                        help="dyadic step-size levels below --h")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: available parallelism)")
    parser.add_argument("--normalize", action="store_true",
                        help="rescale the rigid-body start point to the unit sphere")
    parser.add_argument("--include-diagonal-half", action="store_true",
                        help="add repeated-channel terms to the order-1/2 Taylor step")
    parser.add_argument("--ode-substeps", type=int, default=None,
                        help="inner Runge-Kutta substeps for Lie-series steps")
    parser.add_argument("--dexpinv-order", type=int, default=1)
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--deterministic", action="store_true",
                        help="suppress the timestamp metadata line")
    parser.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liesde",
        description="Strong-pathwise SDE integrators on Lie-group manifolds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("drift", "per-path manifold-defect traces", "mk1"),
        ("casimir", "drift traces specialized to the vehicle problem", "mk1"),
        ("converge", "strong-error convergence against a chained reference", "mk1,st1,cg1"),
        ("uniform", "paired Lie-series vs Taylor accuracy comparison", "mk1"),
        ("localerr", "local-remainder moment checks at the start point", "mk1"),
        ("dump-noise", "write one path's noise hierarchy as binary", "mk1"),
    ]
    for name, help_text, default_methods in specs:
        p = sub.add_parser(name, help=help_text)
        _add_common(p, default_methods)
    return parser


def _flag_given(argv: list, key: str) -> bool:
    flags = ["--" + key.replace("_", "-")]
    if key == "methods":
        flags.append("--method")
    return any(a == f or a.startswith(f + "=") for a in argv for f in flags)


def _resolve(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is not None:
        overrides = read_config_file(args.config)
        if "method" in overrides:
            overrides["methods"] = overrides.pop("method")
        for key, value in overrides.items():
            if not _flag_given(argv, key):
                setattr(args, key, value)
    return args


def _to_config(args: argparse.Namespace) -> harness.RunConfig:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    return harness.RunConfig(
        problem=args.problem,
        methods=methods,
        h=args.h,
        T=args.T,
        paths=args.paths,
        seed=args.seed,
        levels=args.levels,
        out=args.out,
        threads=args.threads,
        normalize=args.normalize,
        include_diagonal_half=args.include_diagonal_half,
        ode_substeps=args.ode_substeps,
        dexpinv_order=args.dexpinv_order,
        deterministic=args.deterministic,
    )


def _run_dump_noise(cfg: harness.RunConfig) -> None:
    cfg = cfg.validated()
    P = problems.make_problem(cfg.problem, normalize=cfg.normalize)
    hier = noise.build_hierarchy(
        noise.path_rng(cfg.seed, 0), cfg.T, cfg.n_steps, cfg.levels, P.d
    )
    if cfg.out is None:
        raise harness.HarnessError("dump-noise requires --out")
    noise.dump_hierarchy(hier, cfg.out, cfg.seed)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _resolve(parser, list(sys.argv[1:] if argv is None else argv))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "casimir":
        if args.problem not in ("rigidbody", "auv"):
            print("error: casimir runs on the auv problem only", file=sys.stderr)
            return 2
        args.problem = "auv"
    try:
        cfg = _to_config(args)
        if args.command == "dump-noise":
            _run_dump_noise(cfg)
            return 0
        runner = {
            "drift": harness.run_drift,
            "casimir": harness.run_drift,
            "converge": harness.run_converge,
            "uniform": harness.run_uniform,
            "localerr": harness.run_localerr,
        }[args.command]
        report = runner(cfg)
        harness.write_csv(report, cfg.out)
    except (harness.HarnessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
