"""Command-line driver: ``drsurf periods | converge | special | moves``.

Exit codes: 0 success, 2 input error, 3 move-script error, 4 solver failure.
All floats are printed with ``%.12e`` so that identical inputs give
byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .complex_core import load_json
from .errors import BadConfiguration, DRSError, NotALoopQuad, SingularC, SolverFail

EXIT_OK, EXIT_INPUT, EXIT_SCRIPT, EXIT_SOLVER = 0, 2, 3, 4


class InputError(Exception):
    """Bad command-line input (exit code 2)."""


class ScriptError(Exception):
    """A move script step failed (exit code 3)."""


# ------------------------------------------------------------------ output

def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return "%.12e" % x


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return "[" + fmt(obj.real) + ", " + fmt(obj.imag) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def to_json_text(obj) -> str:
    """Deterministic JSON text with ``%.12e`` floats and ``[re, im]`` complex numbers."""
    return _encode(obj) + "\n"


def cmatrix(m) -> list:
    return [[complex(v) for v in row] for row in np.atleast_2d(m)]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ------------------------------------------------------------- generators

def _add_surface_flags(p):
    p.add_argument("input", nargs="?", help="complex JSON file")
    p.add_argument("--square-torus", nargs=3, metavar=("P", "Q", "THETA"))
    p.add_argument("--layout", choices=["minus", "plus"], default="minus",
                   help="homology basis layout of the square torus")
    p.add_argument("--tri-hex", nargs=2, type=int, metavar=("M", "N"))
    p.add_argument("--rho", nargs=3, type=float, metavar=("R1", "R2", "R3"),
                   help="critical parameters of the triangular lattice")
    p.add_argument("--genus-two", action="store_true", help="non-critical genus-2 fixture")
    p.add_argument("--noncritical", action="store_true", help="perturb the conformal parameters")


def _surface(args):
    """Return ``(dc, critical map or None, tau_ref or None)``."""
    from .critical_maps import modulus, square_torus, tri_hex_torus
    from .fixtures import genus_two, perturbed
    chosen = [args.input is not None, args.square_torus is not None, args.tri_hex is not None,
              bool(args.genus_two)]
    if sum(chosen) != 1:
        raise InputError("give exactly one of: input file, --square-torus, --tri-hex, --genus-two")
    if args.input is not None:
        try:
            with open(args.input, encoding="utf-8") as fh:
                text = fh.read()
            dc = load_json(json.loads(text))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read complex: {exc}") from exc
        return dc, None, None
    if args.genus_two:
        return genus_two(args.seed), None, None
    if args.square_torus is not None:
        try:
            p, q, theta = int(args.square_torus[0]), int(args.square_torus[1]), float(args.square_torus[2])
        except ValueError as exc:
            raise InputError(f"bad --square-torus values: {exc}") from exc
        m = square_torus(p, q, theta, layout=args.layout)
    else:
        rho = tuple(args.rho) if args.rho else (1 / math.sqrt(3),) * 3
        m = tri_hex_torus(rho, m=args.tri_hex[0], n=args.tri_hex[1])
    if args.noncritical:
        return perturbed(m.dc, seed=args.seed), None, None
    return m.dc, m, modulus(m)


def _dissection(dc, m):
    from .homology import canonical_dissection, canonical_dissection_of
    if m is not None and m.basis is not None:
        return canonical_dissection(list(m.basis), dc)
    return canonical_dissection_of(dc)


# ---------------------------------------------------------------- periods

def cmd_periods(args) -> str:
    from .harmonic_period import (check_bilinear, compute_periods, diamond_harmonic_lifts,
                                  random_closed_diamond, random_closed_lambda, structural_report)
    dc, m, tau = _surface(args)
    if not dc.closed:
        raise InputError("periods need a closed surface")
    d = _dissection(dc, m)
    pd = compute_periods(d)
    rng = np.random.default_rng(args.seed)
    lam_res, dia_res = [], []
    for _ in range(args.pairs):
        a, b = random_closed_lambda(pd, rng), random_closed_lambda(pd, rng)
        lam_res.append(check_bilinear(a, b, d))
    try:
        lifts = diamond_harmonic_lifts(pd)
        for _ in range(args.pairs):
            a, b = random_closed_diamond(lifts, rng), random_closed_diamond(lifts, rng)
            dia_res.append(check_bilinear(a, b, d))
    except DRSError:
        lifts = None
    report = structural_report(pd)
    residuals = {k: v for k, v in report.items() if not k.startswith("solver_")}
    residuals["bilinear_lambda_max"] = max(lam_res, default=0.0)
    residuals["bilinear_diamond_max"] = max(dia_res, default=0.0) if lifts is not None else None
    out = {
        "genus": pd.genus,
        "n_quads": dc.n_quads,
        "gram": pd.gram,
        "pi": cmatrix(pd.pi),
        "pi_gamma": cmatrix(pd.pi_gamma),
        "pi_gamma_star": cmatrix(pd.pi_gamma_star),
        "pi_diamond": cmatrix(pd.pi_diamond),
        "tau_ref": complex(tau) if tau is not None else None,
        "duality": pd.duality,
        "solver": pd.stats.as_dict(),
        "residuals": residuals,
    }
    return to_json_text(out)


# --------------------------------------------------------------- converge

def cmd_converge(args) -> str:
    from .critical_maps import refine
    from .fixtures import perturbed
    from .harmonic_period import compute_periods
    from .homology import canonical_dissection
    if args.levels < 1:
        raise InputError("levels must be at least 1")
    noncritical = args.noncritical
    args.noncritical = False
    dc, m, tau = _surface(args)
    if m is None:
        raise InputError("converge needs a generated critical torus (--square-torus or --tri-hex)")
    rows = []
    for level in range(args.levels):
        if level:
            m = refine(m)
        dcl = perturbed(m.dc, seed=args.seed + level) if noncritical else m.dc
        pd = compute_periods(canonical_dissection(list(m.basis), dcl))
        pg, ps = complex(pd.pi_gamma[0, 0]), complex(pd.pi_gamma_star[0, 0])
        rows.append([level + 1, dcl.n_quads, float(m.delta), float(abs(pg - ps)),
                     float(abs(pg - tau)) if tau is not None else float("nan"),
                     pg.real, pg.imag, ps.real, ps.imag])
    header = ["level", "n_quads", "delta", "gap_gamma_gamma_star", "gap_to_tau",
              "re_pi_gamma", "im_pi_gamma", "re_pi_gamma_star", "im_pi_gamma_star"]
    return _csv_text(header, rows)


# ---------------------------------------------------------------- special

def cmd_special(args) -> tuple:
    from .critical_maps import chain_powers, exponential, power, sextant_patch, square_patch
    lam = complex(args.lam.replace(" ", "")) if args.lam is not None else 1.0 + 0.0j
    k = args.k
    if args.kind == "power" and k is None:
        raise InputError("special power needs --k")
    if k is not None and k < 0:
        raise InputError("--k must be non-negative")
    header = ["vertex", "re_z", "im_z", "re_f", "im_f", "re_f_cont", "im_f_cont"]
    if args.chain is not None:
        n = args.chain
        if n < 1:
            raise InputError("--chain needs n >= 1")
        x = np.arange(n + 1) / n
        if args.kind == "power":
            f = chain_powers(n, k)[k].astype(np.complex128)
            fc = x.astype(np.complex128) ** k
        else:
            if abs(abs(lam) / n - 2.0) <= 1e-12:
                raise InputError("lambda lies on the singular circle")
            step = (2 + lam / n) / (2 - lam / n)
            f = step ** np.arange(n + 1)
            fc = np.exp(lam * x)
        z = x.astype(np.complex128)
    else:
        if args.sextant is not None:
            m = sextant_patch(args.sextant)
        else:
            m = square_patch(args.square if args.square is not None else 4)
        z = m.vertex_z
        if args.kind == "power":
            f = power(m, k).values
            fc = z ** k
        else:
            f = exponential(m, lam).values
            fc = np.exp(lam * z)
    rows = [[i, z[i].real, z[i].imag, f[i].real, f[i].imag, fc[i].real, fc[i].imag]
            for i in range(len(z))]
    summary = f"# max_abs_error={fmt(np.abs(f - fc).max())} n_points={len(z)}\n"
    return _csv_text(header, rows), summary


# ------------------------------------------------------------------ moves

def cmd_moves(args) -> str:
    from .critical_maps import exponential, sextant_patch
    from .discrete_calculus import cr_residuals
    from .electrical_moves import apply_move, dirichlet_energy, holomorphic_dimension, total_curvature, transport
    if args.sextant is not None:
        if args.input or args.square_torus or args.tri_hex or args.genus_two:
            raise InputError("--sextant excludes other surfaces")
        m = sextant_patch(args.sextant)
        dc = m.dc
        f = exponential(m, complex(args.lam.replace(" ", "")) if args.lam else 0.5 + 0.25j)
    else:
        dc, _, _ = _surface(args)
        f = None
    try:
        with open(args.script, encoding="utf-8") as fh:
            script = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read script: {exc}") from exc
    if not isinstance(script, list):
        raise InputError("a move script is a JSON list of moves")
    led = dc.conic_angles()
    trace = [{"step": 0, "total_curvature": total_curvature(led),
              "holomorphic_dimension": holomorphic_dimension(dc) if dc.closed else None}]
    rho0 = np.sort(dc.rho)
    transport_log = []
    for i, spec in enumerate(script):
        try:
            new, rec = apply_move(dc, spec, angles=led)
        except (BadConfiguration, NotALoopQuad) as exc:
            raise ScriptError(f"move {i}: {exc}") from exc
        entry = {"step": i + 1, "kind": rec.kind, "direction": rec.direction, "site": rec.site,
                 "total_curvature": total_curvature(rec.angles),
                 "holomorphic_dimension": holomorphic_dimension(new) if new.closed else None}
        if rec.kind == "III":
            entry["star_triangle_residual"] = rec.star_triangle_residual()
        trace.append(entry)
        if f is not None:
            g = transport(f, rec)
            transport_log.append({"step": i + 1, "cr_residual": float(cr_residuals(g).max()),
                                  "energy_change": abs(dirichlet_energy(g) - dirichlet_energy(f))})
            f = g
        dc, led = new, rec.angles
    rho1 = np.sort(dc.rho)
    out = {
        "moves": len(script),
        "final_complex": dc.to_json(),
        "trace": trace,
        "transport": transport_log,
        "residuals": {
            "curvature_drift": max(abs(t["total_curvature"] - trace[0]["total_curvature"]) for t in trace),
            "ledger_vs_recomputed": float(np.abs(led - dc.conic_angles()).max()),
            "rho_multiset_change": float(np.abs(rho1 - rho0).max()) if len(rho1) == len(rho0) else None,
        },
    }
    return to_json_text(out)


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drsurf", description="Discrete Riemann surface experiments.")
    ap.add_argument("--version", action="version", version=f"drsurf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("periods", help="period matrices of a closed surface (JSON)")
    _add_surface_flags(p)
    p.add_argument("--pairs", type=int, default=5, help="random closed-form pairs for the bilinear check")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("converge", help="refinement sweep of a critical torus (CSV)")
    _add_surface_flags(p)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("special", help="discrete exponential or powers on a planar patch (CSV)")
    p.add_argument("kind", choices=["exp", "power"])
    p.add_argument("--lambda", dest="lam", default=None, help="complex parameter, e.g. 1+0.5j")
    p.add_argument("--k", type=int, default=None)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--sextant", type=int, default=None, metavar="R")
    grp.add_argument("--square", type=int, default=None, metavar="N")
    grp.add_argument("--chain", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("moves", help="apply a JSON move script (JSON)")
    _add_surface_flags(p)
    p.add_argument("--script", required=True)
    p.add_argument("--sextant", type=int, default=None, metavar="R",
                   help="planar sextant patch; transports an exponential across the moves")
    p.add_argument("--lambda", dest="lam", default=None)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "periods":
            sys.stdout.write(cmd_periods(args))
        elif args.command == "converge":
            sys.stdout.write(cmd_converge(args))
        elif args.command == "special":
            text, summary = cmd_special(args)
            sys.stdout.write(text)
            sys.stderr.write(summary)
        else:
            sys.stdout.write(cmd_moves(args))
    except ScriptError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SCRIPT
    except (SolverFail, SingularC) as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except (InputError, DRSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
