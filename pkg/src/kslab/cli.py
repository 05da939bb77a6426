"""Command-line pipeline: tables, zeros, spectra, series, claim tables.

Every command is deterministic for a fixed configuration and seed; the
only run-to-run variation is the timestamp, which is isolated in the
"meta" block of JSON output so payloads can be compared byte for byte.
Exit codes: 0 success, 2 configuration error, 3 a required table is
missing from the cache, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .cluster import (PowerSeries, claim_row, density_coefficients_extrapolated,
                      density_series, log_series, radius_estimate, sign_pattern,
                      virial_reversion)
from .errors import ConfigError, KslabError, MissingPrerequisite, NumericalError
from .integrals import Box, build_table, cache_path, load_table
from .ksop import build_ks_matrix, ks_residual
from .oracles import IdealModel, TonksModel
from .partition import (assemble, smallest_zero, zeros, zeros_to_json,
                        zeros_to_rows)
from .potentials import PairPotential, regularity_C
from .spectral import (leading_asymptotics, leading_projection, power_convergence,
                       spectral_radius_check, spectrum)

# -- configuration plumbing ------------------------------------------------------


def _potential(args) -> PairPotential:
    if getattr(args, "potential_file", None):
        try:
            with open(args.potential_file) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {args.potential_file}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{args.potential_file} is not valid JSON: {exc}") from None
        cfg.setdefault("dimension", len(_extents(args)))
        return PairPotential.from_config(cfg)
    cfg = {
        "family": args.potential,
        "a": args.a,
        "epsilon": args.epsilon,
        "beta": args.beta,
        "dimension": len(_extents(args)),
    }
    return PairPotential.from_config(cfg)


def _extents(args):
    if args.L is None:
        raise ConfigError("--L is required (box extent, comma-separated per axis)")
    try:
        ext = tuple(float(x) for x in str(args.L).split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse --L {args.L!r}: {exc}") from None
    if not ext or any(e <= 0 for e in ext):
        raise ConfigError("box extents must be positive")
    return ext


def _table(args, M=None):
    """Z-table for the run: from the cache when one is expected, else built.

    With --cache-dir the table must already exist there (the pipeline
    contract: run the table subcommand first); without it the table is
    built in memory.
    """
    M = args.M if M is None else M
    p = _potential(args)
    box = Box(_extents(args))
    if args.cache_dir:
        path = cache_path(args.cache_dir, p, box)
        cached = load_table(path, p, box) if os.path.exists(path) else None
        if cached is None or cached.M < M:
            raise MissingPrerequisite(
                f"no cached table for this potential and box at M={M} "
                f"under {args.cache_dir}; run the table subcommand first")
        return p, box, cached
    return p, box, build_table(p, box, M, order=args.order, seed=args.seed)


def _meta(args, command):
    return {
        "command": command,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": args.seed,
        "version": __version__,
    }


def _emit(args, command, payload, rows, row_fields):
    """Write JSON (payload + meta) or CSV (rows); print a file note."""
    if args.format == "csv":
        if rows is None:
            raise ConfigError(f"{command} has no CSV representation; use --format json")
        out = args.out or f"{command}.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=row_fields)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {out}")
        return
    doc = {"meta": _meta(args, command), **payload}
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)


def _series_pair(args):
    """(density, pressure) activity series, finite box or extrapolated."""
    p = _potential(args)
    N = args.terms
    if args.extrapolate:
        ext = _extents(args)
        if len(ext) != 1:
            raise ConfigError("--extrapolate needs a one-dimensional box")
        lengths = (ext[0], 2 * ext[0], 4 * ext[0])
        dens, errs, _ = density_coefficients_extrapolated(
            p, lengths, N, cache_dir=args.cache_dir)
        # pressure coefficients extrapolate the same way: ell_k / L
        pres_vals = np.zeros(N + 1)
        per_len = []
        for L in lengths:
            table = build_table(p, Box((float(L),)), N, cache_dir=args.cache_dir)
            poly = assemble(table)
            per_len.append(log_series(poly, N).values / L)
        from .cluster import richardson

        for k in range(1, N + 1):
            pres_vals[k], _ = richardson([v[k] for v in per_len],
                                         ratio=lengths[1] / lengths[0])
        # keep only orders the ladder actually resolves: high orders lose
        # all significant digits to cancellation in the finite-volume
        # recurrence and come out comparable to their own error estimate
        vals = dens.values
        cut = N
        for k in range(1, N + 1):
            if vals[k] != 0.0 and errs[k] >= 0.1 * abs(vals[k]):
                cut = k - 1
                break
        dens = PowerSeries.from_values(vals[: cut + 1], "z")
        pres = PowerSeries.from_values(pres_vals[: cut + 1], "z")
        return dens, pres, {"lengths": list(lengths), "kept_orders": cut,
                            "errors": errs[: cut + 1].tolist()}
    # coefficient k of log Xi needs c_1..c_k, so the table must reach N
    _, box, table = _table(args, M=max(args.M, N))
    poly = assemble(table)
    ls = log_series(poly, N)
    return (density_series(ls, box.volume),
            PowerSeries.from_values(ls.values / box.volume, "z"),
            {"box": list(box.extents)})


# -- commands ----------------------------------------------------------------------


def cmd_table(args):
    p = _potential(args)
    box = Box(_extents(args))
    table = build_table(p, box, args.M, order=args.order, seed=args.seed,
                        cache_dir=args.cache_dir, force=args.force)
    rows = [
        {"m": e.m, "value": e.slog.value, "sign": e.slog.sign,
         "log_magnitude": e.slog.log_mag, "error": e.error, "method": e.method}
        for e in table.entries
    ]
    _emit(args, "table", {"table": table.to_json()}, rows,
          ["m", "value", "sign", "log_magnitude", "error", "method"])
    return 0


def cmd_zeros(args):
    _, _, table = _table(args)
    poly = assemble(table)
    zs = zeros(poly)
    sm = smallest_zero(zs)
    rows = zeros_to_rows(zs, sm)
    print(f"smallest zero {sm.z_c:.12g}  certificate {sm.derivative_certificate:.3e}  "
          f"min gap {sm.min_gap:.3e}  tie {sm.tie}")
    _emit(args, "zeros", {"zeros": zeros_to_json(zs, sm)}, rows,
          ["re", "im", "residual", "is_smallest", "gap"])
    return 0


def cmd_spectral(args):
    _, _, table = _table(args)
    poly = assemble(table)
    ks = build_ks_matrix(poly)
    spec = spectrum(ks)
    rp = leading_projection(ks, spec)
    power = power_convergence(ks, spec, rp.P, n_terms=args.power_terms)
    eig = spec.eigenvalues
    payload = {
        "operator": ks.to_json(),
        "eigenvalues": [[v.real, v.imag] for v in eig],
        "leading": {
            "lambda_c": [spec.lam_c.real, spec.lam_c.imag],
            "subleading_modulus": spec.lam2_mod,
            "distance_gap": spec.dist_gap,
            "tie": spec.is_tie,
        },
        "projection": {
            "center": [rp.center.real, rp.center.imag],
            "radius": rp.radius,
            "n_nodes": rp.n_nodes,
            "precision": rp.precision,
            "rank": rp.rank,
            "second_singular_ratio": rp.second_singular_ratio,
            "idempotency_defect": rp.idempotency_defect,
            "annihilation_defect": rp.annihilation_defect,
            "reduced_identity_defect": rp.reduced_identity_defect,
            "nilpotent_ratio": rp.nilpotent_ratio,
            "pole_order": rp.pole_order,
        },
        "laurent": {
            "P": [[[v.real, v.imag] for v in row] for row in rp.P],
            "S": [[[v.real, v.imag] for v in row] for row in rp.S],
        },
        "power_convergence": {
            "fitted_ratio": power.fitted_ratio,
            "median_ratio": power.median_ratio,
            "expected_ratio": power.expected_ratio,
            "n_used": power.n_used,
        },
    }
    rows = [
        {"re": v.real, "im": v.imag, "modulus": abs(v),
         "is_leading": int(v == spec.lam_c)}
        for v in eig
    ]
    print(f"lambda_c {spec.lam_c:.10g}  rank(P) {rp.rank}  "
          f"pole order {rp.pole_order}  precision {rp.precision}")
    _emit(args, "spectral", payload, rows, ["re", "im", "modulus", "is_leading"])
    return 0


def cmd_asymptotics(args):
    _, box, table = _table(args)
    poly = assemble(table)
    if args.anchors:
        try:
            anchors = [[float(c) for c in part.split(",")]
                       for part in args.anchors.split(";")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse --anchors {args.anchors!r}: {exc}") from None
    else:
        anchors = [[0.5 * e for e in box.extents]]
    res = leading_asymptotics(poly, anchors)
    rows = [{"angle": r.angle, "re": r.value.real, "im": r.value.imag,
             "change": r.change} for r in res.rays]
    print(f"ray {res.ray_value:.10g}  residue {res.residue_value:.10g}  "
          f"agreement {res.agreement:.3e}")
    _emit(args, "asymptotics", {"asymptotics": res.to_json()}, rows,
          ["angle", "re", "im", "change"])
    return 0


def cmd_cluster(args):
    dens, _, info = _series_pair(args)
    payload = {"density_series": dens.to_rows(), "source": info}
    try:
        est = radius_estimate(dens, method=args.radius_method)
        payload["radius"] = {
            "method": est.method, "R": est.R,
            "singularity": [est.singularity.real, est.singularity.imag],
            "sign_pattern": est.sign_pattern, "diagnostics": est.diagnostics,
        }
        print(f"density series radius {est.R:.6g} ({est.sign_pattern})")
    except NumericalError as exc:
        payload["radius"] = None
        print(f"radius not estimated: {exc}")
    _emit(args, "cluster", payload, dens.to_rows(), ["n", "coefficient", "sign"])
    return 0


def cmd_virial(args):
    p = _potential(args)
    dens, pres, info = _series_pair(args)
    vir, est = virial_reversion(dens, pres)
    C, _ = regularity_C(p)
    payload = {"virial_series": vir.to_rows(), "source": info}
    if est is not None:
        payload["radius"] = {"method": est.method, "R": est.R,
                             "sign_pattern": est.sign_pattern}
        if C > 0:
            payload["bound"] = claim_row("virial radius vs half kernel norm",
                                         1.0 / (2.0 * C), est.R,
                                         relation="at_least")
        print(f"virial radius {est.R:.8g}")
    else:
        payload["radius"] = None
    _emit(args, "virial", payload, vir.to_rows(), ["n", "coefficient", "sign"])
    return 0


def cmd_claimcheck(args):
    p = _potential(args)
    _, box, table = _table(args, M=max(args.M, args.terms))
    poly = assemble(table)
    ks = build_ks_matrix(poly)
    C, _ = regularity_C(p)
    oracle = None
    if p.family == "hardcore" and box.dimension == 1:
        oracle = TonksModel(p.a)
    elif p.family == "ideal":
        oracle = IdealModel(box.volume)

    rows = []
    # default comparison activity: the claimed convergence radius 1/C
    xi = args.xi if args.xi is not None else (1.0 / C if C > 0 else None)
    if xi:
        rad = spectral_radius_check(ks, xi)
        rows.append(claim_row("spectral radius vs 1/xi", rad["xi_inverse"],
                              rad["spectral_radius"], relation="at_most"))

    dens, pres, _ = _series_pair(args)
    try:
        est = radius_estimate(dens, method=args.radius_method)
        measured_R = est.R
    except NumericalError:
        est, measured_R = None, None
    oracle_R = oracle.cluster_radius if oracle is not None else None
    if measured_R is not None:
        claimed_R = 1.0 / C if C > 0 else float("inf")
        rows.append(claim_row("activity series radius vs inverse kernel norm",
                              claimed_R, measured_R, oracle_R))

    if p.family == "ideal":
        # no claim of a singularity here: the zeros must recede as the
        # truncation grows, consistent with a zero-free pressure
        lo = assemble(build_table(p, box, max(1, args.M - 1),
                                  order=args.order, seed=args.seed))
        rows.append(claim_row("smallest zero modulus recedes with truncation",
                              abs(smallest_zero(zeros(lo)).z_c),
                              abs(smallest_zero(zeros(poly)).z_c),
                              relation="at_least"))
    else:
        pattern = sign_pattern(dens)
        rows.append({
            "quantity": "density series sign pattern",
            "relation": "equals",
            "claimed": "alternating",
            "measured": pattern,
            "oracle": "alternating" if isinstance(oracle, TonksModel) else None,
            "uncertainty": None,
            "verdict": "consistent" if pattern == "alternating" else "inconsistent",
        })
        vir, vest = virial_reversion(dens, pres)
        if vest is not None and C > 0:
            rows.append(claim_row(
                "virial radius vs half inverse kernel norm",
                1.0 / (2.0 * C), vest.R,
                1.0 / p.a if isinstance(oracle, TonksModel) else None,
                relation="at_least"))
    payload = {
        "policy": {
            "uncertainty": "max(2 |measured - oracle|, 2% of measured)",
            "consistent_within": "1 uncertainty",
            "inconsistent_beyond": "3 uncertainties",
        },
        "rows": rows,
    }
    for r in rows:
        print(f"{r['quantity']}: measured {r['measured']} vs claimed "
              f"{r['claimed']} -> {r['verdict']}")
    _emit(args, "claimcheck", payload, rows,
          ["quantity", "relation", "claimed", "measured", "oracle",
           "uncertainty", "verdict"])
    return 0


def cmd_residual(args):
    _, _, table = _table(args)
    poly = assemble(table)
    try:
        z = complex(args.z)
    except ValueError:
        raise ConfigError(f"cannot parse --z {args.z!r} as a complex number") from None
    report = ks_residual(poly, z, args.n_max, strategy=args.strategy,
                         order=args.order, count=args.probes,
                         constant_term=args.constant_term, seed=args.seed)
    gap = max(lv.truncation_gap for lv in report.levels)
    print(f"sup residual {report.sup_residual:.3e}  error bound "
          f"{report.error_bound:.3e}  truncation gap {gap:.3e}")
    rows = [
        {"n": lv.n, "sup_residual": lv.sup_residual, "error_bound": lv.error_bound,
         "truncation_gap": lv.truncation_gap, "n_probes": lv.n_probes}
        for lv in report.levels
    ]
    _emit(args, "residual", {"residual": report.to_json()}, rows,
          ["n", "sup_residual", "error_bound", "truncation_gap", "n_probes"])
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--potential", default="hardcore",
                        choices=("ideal", "hardcore", "step", "custom"))
    common.add_argument("--potential-file", default=None,
                        help="JSON potential config; overrides the flag form")
    common.add_argument("--a", type=float, default=1.0, help="core diameter")
    common.add_argument("--epsilon", type=float, default=0.0, help="step height")
    common.add_argument("--beta", type=float, default=1.0)
    common.add_argument("--L", default=None,
                        help="box extents, comma-separated per axis")
    common.add_argument("--M", type=int, default=8, help="truncation order")
    common.add_argument("--xi", type=float, default=None,
                        help="weight for the spectral-radius comparison")
    common.add_argument("--order", type=int, default=16, help="quadrature order")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", default=None, help="output file path")
    common.add_argument("--format", default="json", choices=("json", "csv"))
    common.add_argument("--cache-dir", default=None)

    parser = argparse.ArgumentParser(
        prog="kslab",
        description="Partition zeros, operator spectra, and series analysis "
                    "for finite-volume gases")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("table", parents=[common]).add_argument(
        "--force", action="store_true", help="rebuild even if cached")
    sub.add_parser("zeros", parents=[common])
    sp_spec = sub.add_parser("spectral", parents=[common])
    sp_spec.add_argument("--power-terms", type=int, default=60)
    sp_asym = sub.add_parser("asymptotics", parents=[common])
    sp_asym.add_argument("--anchors", default=None,
                         help="semicolon-separated anchors, comma per axis")
    for name in ("cluster", "virial", "claimcheck"):
        sp_c = sub.add_parser(name, parents=[common])
        sp_c.add_argument("--terms", type=int, default=14,
                          help="series length for cluster analysis")
        sp_c.add_argument("--extrapolate", action="store_true",
                          help="Richardson over box lengths L, 2L, 4L")
        sp_c.add_argument("--radius-method", default="domb_sykes",
                          choices=("ratio", "root", "domb_sykes"))
    sp_res = sub.add_parser("residual", parents=[common])
    sp_res.add_argument("--z", default="0.1", help="activity, python complex syntax")
    sp_res.add_argument("--n-max", type=int, default=3)
    sp_res.add_argument("--strategy", default="quadrature",
                        choices=("quadrature", "sampling"))
    sp_res.add_argument("--probes", type=int, default=64)
    sp_res.add_argument("--constant-term", default="consistent",
                        choices=("consistent", "unit"))
    return parser


_DISPATCH = {
    "table": cmd_table,
    "zeros": cmd_zeros,
    "spectral": cmd_spectral,
    "asymptotics": cmd_asymptotics,
    "cluster": cmd_cluster,
    "virial": cmd_virial,
    "claimcheck": cmd_claimcheck,
    "residual": cmd_residual,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except MissingPrerequisite as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except KslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
