"""Command-line front end.

Exit codes: 0 success, 2 input or validation error, 3 numerical nonconvergence.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .calculus import LaurentPoly, LineFn
from .dilation import power_dilation
from .doi import doi_semispectral
from .errors import ConvergenceError, ValidationError
from .intermediate import intermediate_general
from .operators import KINDS, adjoint, opnorm, random_ensemble
from .serialization import matrix_to_json, read_json, read_matrix, write_json, write_matrix
from .ssf import (
    QuadratureSpec,
    SSFSample,
    ssf_contraction_pair,
    ssf_dissipative_additive,
    ssf_dissipative_resolvent_pair,
    ssf_selfadjoint_pair,
    ssf_unitary_pair,
    verify_trace_formula,
)

LOGGER = logging.getLogger("specshift")

SSF_CLASSES = ("contraction", "unitary", "selfadjoint", "dissipative-resolvent", "dissipative-additive")
LINE_CLASSES = ("selfadjoint", "dissipative-resolvent", "dissipative-additive")


@dataclass
class RunConfig:
    subcommand: str
    inputs: list
    t_nodes: int
    theta_grid: int
    path_steps: int
    tolerance: float
    out: str
    seed: int
    shift_grid: bool

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(self.t_nodes, self.theta_grid, self.path_steps, self.shift_grid, self.tolerance)


# ---------------------------------------------------------------------------
# helpers

_FUNC_RE = re.compile(r"^(zeta|t|cayley)(?:\^(-?\d+))?$")


def parse_function(text: str, cls: str):
    """``zeta^k``, ``t^k``, ``cayley^k`` or a path to LaurentPoly JSON."""
    m = _FUNC_RE.match(text.strip())
    if m:
        var, k = m.group(1), int(m.group(2) or 1)
        p = LaurentPoly.monomial(k)
        if var == "cayley":
            return LineFn(p)
        if var == "t" and cls not in LINE_CLASSES:
            raise ValidationError("t^k applies to line classes only")
        if var == "zeta" and cls in LINE_CLASSES:
            raise ValidationError("use t^k or cayley^k for line classes")
        return p
    path = Path(text)
    if path.exists():
        p = LaurentPoly.from_json(read_json(path))
        return LineFn(p) if cls in ("dissipative-resolvent", "dissipative-additive") else p
    raise ValidationError(f"cannot parse function {text!r}")


def default_battery(cls: str) -> list[str]:
    if cls == "selfadjoint":
        return ["t", "t^2", "t^3"]
    if cls in LINE_CLASSES:
        return ["cayley", "cayley^2", "cayley^3"]
    return ["zeta", "zeta^2", "zeta^3"]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _pair_for(cls: str, A: np.ndarray, B: np.ndarray):
    """Endpoint pair for the trace formula (the additive class takes ``K``)."""
    if cls == "dissipative-additive":
        return A, A + B
    return A, B


def _compute_ssf(cls: str, A, B, spec: QuadratureSpec) -> SSFSample:
    if A.shape != B.shape:
        raise ValidationError(f"dimension mismatch: {A.shape} vs {B.shape}")
    if cls == "contraction":
        return ssf_contraction_pair(A, B, spec)
    if cls == "unitary":
        return ssf_unitary_pair(A, B, spec)
    if cls == "selfadjoint":
        return ssf_selfadjoint_pair(A, B, spec)
    if cls == "dissipative-resolvent":
        return ssf_dissipative_resolvent_pair(A, B, spec)
    if cls == "dissipative-additive":
        return ssf_dissipative_additive(A, B, spec)
    raise ValidationError(f"unknown class {cls!r}")


def _residual_table(cls, pair, xi, funcs, method="auto"):
    rows = []
    for label in funcs:
        f = parse_function(label, cls)
        r = verify_trace_formula(pair, f, xi, method)
        rows.append({"f": label, **r})
    return rows


def _print_table(rows):
    print(f"{'f':>12} {'residual':>12} {'relative':>12} method")
    for r in rows:
        print(f"{r['f']:>12} {r['residual']:12.3e} {r['relative']:12.3e} {r['method']}")


def _out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands

def cmd_ssf(args, cfg: RunConfig) -> int:
    A, B = read_matrix(args.first), read_matrix(args.second)
    xi = _compute_ssf(args.cls, A, B, cfg.quadrature())
    out = _out_dir(cfg)
    (out / "ssf.csv").write_text(xi.to_csv())
    write_json(out / "ssf.json", xi.to_json())
    funcs = args.f or default_battery(args.cls)
    rows = _residual_table(args.cls, _pair_for(args.cls, A, B), xi, funcs)
    report = {
        "class": args.cls,
        "config": asdict(cfg),
        "gauge": xi.gauge,
        "domain": xi.domain,
        "residuals": rows,
        "converged": True,
        "meta": xi.meta,
    }
    write_json(out / "report.json", _jsonable(report))
    _print_table(rows)
    if args.plot:
        from .plotting import plot_residuals, plot_ssf
        plot_ssf(xi, out / "ssf.png", f"{args.cls} pair")
        plot_residuals([r["f"] for r in rows], [r["residual"] for r in rows], out / "residuals.png")
    return 0


def _load_ssf(path: str, cls: str) -> SSFSample:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"no such file {path}")
    if p.suffix == ".json":
        return SSFSample.from_json(read_json(p))
    domain = "line" if cls in LINE_CLASSES else "circle"
    return SSFSample.from_csv(p.read_text(), domain=domain)


def cmd_verify(args, cfg: RunConfig) -> int:
    A, B = read_matrix(args.first), read_matrix(args.second)
    if A.shape != B.shape:
        raise ValidationError("dimension mismatch")
    xi = _load_ssf(args.ssf, args.cls)
    funcs = args.f or default_battery(args.cls)
    rows = _residual_table(args.cls, _pair_for(args.cls, A, B), xi, funcs)
    out = _out_dir(cfg)
    write_json(out / "verify.json", _jsonable({"class": args.cls, "config": asdict(cfg), "residuals": rows}))
    _print_table(rows)
    if args.plot:
        from .plotting import plot_residuals
        plot_residuals([r["f"] for r in rows], [r["residual"] for r in rows], out / "verify.png")
    return 0


def cmd_intermediate(args, cfg: RunConfig) -> int:
    A, B = read_matrix(args.first), read_matrix(args.second)
    res = intermediate_general(A, B, cfg.quadrature(), order=args.order)
    out = _out_dir(cfg)
    paths = {}
    for name in ("xi0", "xi1", "xi"):
        s = getattr(res, name)
        (out / f"{name}.csv").write_text(s.to_csv())
        paths[name] = f"{name}.csv"
    rows = _residual_table("contraction", (A, B), res.xi, args.f or ["zeta", "zeta^2"])
    payload = {"T": matrix_to_json(res.T), "certificates": res.certificates, **paths,
               "residuals": rows, "config": asdict(cfg)}
    write_json(out / "intermediate.json", _jsonable(payload))
    for k in sorted(res.certificates):
        print(f"{k:>26}: {res.certificates[k]}")
    _print_table(rows)
    if args.plot:
        from .plotting import plot_ssf
        plot_ssf(res.xi0, out / "xi0.png", "xi0")
        plot_ssf(res.xi1, out / "xi1.png", "xi1")
    return 0


def cmd_dilate(args, cfg: RunConfig) -> int:
    T = read_matrix(args.first)
    dil = power_dilation(T, args.order, cfg.tolerance)
    W = dil.W
    out = _out_dir(cfg)
    write_matrix(out / "dilation.json", W)
    report = {
        "order": args.order,
        "unitarity": opnorm(adjoint(W) @ W - np.eye(W.shape[0])),
        "compression_errors": [opnorm(dil.compression(n) - np.linalg.matrix_power(dil.T, n))
                               for n in range(1, args.order + 1)],
        "config": asdict(cfg),
    }
    write_json(out / "dilation_report.json", _jsonable(report))
    print(f"dilation size {W.shape[0]}, unitarity defect {report['unitarity']:.3e}")
    if args.plot:
        from .plotting import plot_matrix
        plot_matrix(W, out / "dilation.png", f"power dilation, order {args.order}")
    return 0


def cmd_doi(args, cfg: RunConfig) -> int:
    T0, T1 = read_matrix(args.first), read_matrix(args.second)
    if T0.shape != T1.shape:
        raise ValidationError("dimension mismatch")
    K = read_matrix(args.q) if args.q else T1 - T0
    f = parse_function(args.f[0] if args.f else "zeta^2", "contraction")
    D = doi_semispectral(f, T1, T0, K, cfg.tolerance)
    out = _out_dir(cfg)
    write_matrix(out / "doi.json", D)
    print(f"DOI norm {opnorm(D):.6e}")
    if args.plot:
        from .plotting import plot_matrix
        plot_matrix(D, out / "doi.png", "double operator integral")
    return 0


def cmd_random(args, cfg: RunConfig) -> int:
    M = random_ensemble(args.kind, args.n, cfg.seed)
    out = _out_dir(cfg)
    write_matrix(out / args.name, M)
    print(str(out / args.name))
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--t-nodes", type=int, default=64)
    common.add_argument("--theta-grid", type=int, default=2048)
    common.add_argument("--steps", type=int, default=2000)
    common.add_argument("--tolerance", type=float, default=1e-10)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--shift-grid", action="store_true")
    common.add_argument("--out", default="out")
    common.add_argument("--plot", action="store_true", help="also write PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="specshift", description="Spectral shift functions and trace formulas")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ssf", parents=[common], help="compute an SSF and its residual report")
    p.add_argument("--class", dest="cls", choices=SSF_CLASSES, required=True)
    p.add_argument("first")
    p.add_argument("second", help="second endpoint (perturbation K for dissipative-additive)")
    p.add_argument("--f", action="append", help="function, e.g. zeta^2, t^3, cayley^2")
    p.set_defaults(handler=cmd_ssf)

    p = sub.add_parser("verify", parents=[common], help="check a stored SSF against a pair")
    p.add_argument("--class", dest="cls", choices=SSF_CLASSES, required=True)
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("ssf", help="SSF CSV (grid) or SSF JSON (exact components)")
    p.add_argument("--f", action="append")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("intermediate", parents=[common], help="intermediate contraction and sign split")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--order", type=int, default=8, help="degree bound for regularizer SSFs")
    p.add_argument("--f", action="append")
    p.set_defaults(handler=cmd_intermediate)

    p = sub.add_parser("dilate", parents=[common], help="power dilation of a contraction")
    p.add_argument("first")
    p.add_argument("--order", type=int, default=2)
    p.set_defaults(handler=cmd_dilate)

    p = sub.add_parser("doi", parents=[common], help="double operator integral of a divided difference")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--q", help="matrix the DOI acts on (default T1 - T0)")
    p.add_argument("--f", action="append")
    p.set_defaults(handler=cmd_doi)

    p = sub.add_parser("random", parents=[common], help="write a reproducible random matrix")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--name", default="matrix.json")
    p.set_defaults(handler=cmd_random)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    inputs = [v for k, v in vars(args).items() if k in ("first", "second", "ssf", "q") and v]
    try:
        cfg = RunConfig(args.command, inputs, args.t_nodes, args.theta_grid, args.steps,
                        args.tolerance, args.out, args.seed, args.shift_grid)
        cfg.quadrature()
        return args.handler(args, cfg)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
