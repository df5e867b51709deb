"""Command line front end.

Every subcommand prints one envelope to stdout: tool version, the full
configuration it ran with, the seed, elapsed time, and the result payload.
Exit codes: 0 on success, 2 when a guard or the sign source refuses the
request, 1 on an internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction

from . import __version__
from . import discrepancy as disc
from . import dyadic, extremal, fixtures, probability, witness2d, witness3d
from .dyadic import GuardRefusal, HaarField, field_eval, parse_signs_token

DEFAULT_SEED = 1


class UsageError(Exception):
    """Bad user input that argparse cannot catch on its own."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=None, help="maximum scale sum")
    common.add_argument("--d", type=int, default=3, help="dimension")
    common.add_argument("--q", type=int, default=2, help="number of blocks")
    common.add_argument("--tau", type=str, default="0.1",
                        help="stage threshold as a decimal or p/q string")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--signs", type=str, default=None,
                        help="all-plus | seed:K | file:PATH (default seed:SEED)")
    common.add_argument("--restarts", type=int, default=200)
    # default is per command (see BUDGET_DEFAULTS); parents share action
    # objects, so a subparser set_defaults would leak across commands
    common.add_argument("--budget", type=int, default=None,
                        help="sample or fixture count for randomized paths")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", type=str, default=None,
                        help="write output to this file (figure goes alongside)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-figures", action="store_true",
                        help="skip the companion PNG when --out is given")

    parser = argparse.ArgumentParser(
        prog="smallball",
        description="signed hyperbolic Haar sums: witnesses, identities, bounds")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common],
                       help="evaluate the signed field at one grid point")
    p.add_argument("--point", type=str, required=True,
                   help="comma separated cell indices")
    p.add_argument("--resolution", type=int, default=None,
                   help="bits per coordinate (default n+1)")

    p = sub.add_parser("supnorm", parents=[common],
                       help="exact sup norm of the signed field")
    p.add_argument("--method", choices=("auto", "exhaustive", "branch-bound"),
                   default="auto")

    p = sub.add_parser("witness2d", parents=[common],
                       help="greedy two dimensional witness point")
    p.add_argument("--x2", type=int, default=None,
                   help="second coordinate cell index (default all ones)")

    sub.add_parser("witness3d", parents=[common],
                   help="conditional stagewise witness search")

    sub.add_parser("identity-check", parents=[common],
                   help="certify the block square identity on every cell")

    sub.add_parser("lemmas", parents=[common],
                   help="replay probability lemma proofs on random fixtures")

    p = sub.add_parser("orlicz-scan", parents=[common],
                       help="tail constant of the cross term over an n-grid")
    p.add_argument("--alpha", type=float, default=None,
                   help="Orlicz exponent (default 2/3)")

    p = sub.add_parser("discrepancy", parents=[common],
                       help="exact star discrepancy and Monte Carlo L2 norm")
    p.add_argument("--points", type=str, default="vdc:8",
                   help="vdc:K | file:PATH")

    return parser


BUDGET_DEFAULTS = {"lemmas": 200, "orlicz-scan": 100000, "discrepancy": 10000}


def _budget(args) -> int:
    budget = args.budget
    if budget is None:
        budget = BUDGET_DEFAULTS.get(args.command, 100000)
    if budget < 1:
        raise UsageError("--budget must be positive")
    return budget


def _require_n(args) -> int:
    if args.n is None:
        raise UsageError("--n is required for this command")
    if args.n < 1:
        raise UsageError("--n must be positive")
    return args.n


def _signs(args):
    try:
        return parse_signs_token(args.signs, args.seed)
    except (OSError, ValueError) as exc:
        raise UsageError(f"sign source error: {exc}") from exc


def _parse_point(text: str, dimension: int, resolution: int) -> dyadic.GridPoint:
    try:
        indices = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --point: {exc}") from exc
    if len(indices) != dimension:
        raise UsageError(f"--point needs {dimension} indices, got {len(indices)}")
    if any(i < 0 or i >= (1 << resolution) for i in indices):
        raise UsageError(f"--point indices must lie in [0, 2^{resolution})")
    return dyadic.GridPoint.uniform(resolution, indices)


def cmd_eval(args) -> dict:
    n = _require_n(args)
    if args.d < 1:
        raise UsageError("--d must be positive")
    family = dyadic.hyperbolic_shapes(n, args.d)
    resolution = args.resolution if args.resolution is not None else n + 1
    needed = max(family.min_resolution())
    if resolution < needed:
        raise UsageError(f"--resolution must be at least {needed}")
    point = _parse_point(args.point, args.d, resolution)
    field = HaarField(family, _signs(args))
    value = field_eval(field, point)
    return {
        "value": value,
        "point_indices": list(point.indices),
        "resolution": resolution,
        "family_size": len(family.members),
    }


def cmd_supnorm(args) -> dict:
    n = _require_n(args)
    if not 1 <= args.d <= 3:
        raise UsageError("--d must be 1, 2, or 3 for the sup norm search")
    family = dyadic.hyperbolic_shapes(n, args.d)
    field = HaarField(family, _signs(args))
    method = args.method
    if method == "auto":
        method = "exhaustive" if (n + 1) * args.d <= 24 else "branch-bound"
    if method == "exhaustive":
        res = extremal.sup_norm_exhaustive(field, workers=args.workers)
    else:
        res = extremal.sup_norm_branch_bound(field)
    l2_sq = extremal.l2_norm_sq(field)
    payload = res.to_json()
    payload["l2_sq"] = l2_sq
    payload["sup_ge_l2"] = res.value * res.value >= l2_sq
    return payload


def cmd_witness2d(args) -> dict:
    n = _require_n(args)
    witness = witness2d.greedy_witness_2d(n, _signs(args), x2_index=args.x2)
    payload = witness.to_json()
    if n <= witness2d.MAX_EXACT_N:
        measure = witness2d.witness_measure(n, _signs(args))
        payload["witness_measure"] = str(measure)
        payload["witness_measure_float"] = float(measure)
    return payload


def cmd_witness3d(args) -> dict:
    n = _require_n(args)
    try:
        params = witness3d.SearchParams(
            n=n, q=args.q, d=args.d, tau=args.tau,
            seed=args.seed, restarts=args.restarts)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = witness3d.conditional_witness_search(params, _signs(args))
    payload = report.to_json()
    payload["rows"] = [
        {"restart": r, "stage": t, "value": v, "passed": p}
        for r, t, v, p in report.trace]
    return payload


def cmd_identity_check(args) -> dict:
    n = _require_n(args)
    try:
        decomp = witness3d.BlockDecomposition.build(n, args.d, args.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    signs = _signs(args)
    rows = []
    summaries = []
    for t in range(1, decomp.stages + 1):
        rep = witness3d.identity_check(decomp, signs, t)
        for line in rep["lines"]:
            rows.append({"block": t, **line})
        summaries.append({
            "block": t,
            "ok": rep["holds"],
            "cells": rep["cells_checked"],
            "sigma_sq": rep["sigma_sq"],
            "elapsed_ms": rep["elapsed_ms"],
        })
    holds = all(s["ok"] for s in summaries)
    if not holds:
        bad = [s["block"] for s in summaries if not s["ok"]]
        raise RuntimeError(f"square identity failed on blocks {bad}")
    return {"holds": holds, "rows": rows, "blocks": summaries}


def cmd_lemmas(args) -> dict:
    budget = _budget(args)
    rows = []
    failures = []

    def run(name, check):
        violations = 0
        for i in range(budget):
            ok, detail = check(i)
            if not ok:
                violations += 1
                if len(failures) < 10:
                    failures.append({"suite": name, "fixture": i,
                                     "detail": detail})
        rows.append({"suite": name, "fixtures": budget,
                     "violations": violations})

    def pz(i):
        dist = fixtures.pz_fixture(args.seed, i)
        rep = probability.paley_zygmund_bound(dist)
        return rep["holds"], {"bound": str(rep["bound"])}

    def pz2(i):
        dist, rho1 = fixtures.pz2_fixture(args.seed, i)
        rep = probability.pz2_check(dist, rho1)
        ok = (not rep["hypothesis_ok"]) or (rep["positive"] and rep["witness_ok"])
        return ok, {"rho": rep.get("rho")}

    def lp(i):
        mart = fixtures.martingale_fixture(args.seed, i)
        rep = probability.lp_fourth_moment_check(mart)
        return rep["holds"], {"ratio": rep["ratio"]}

    def chain(i):
        if i % 10 == 9:
            levels, inds, gamma = fixtures.chain_half_fixture(args.seed, i)
        else:
            levels, inds, gamma = fixtures.chain_fixture(args.seed, i)
        rep = probability.cond_indep_lower_bound(levels, inds, gamma)
        return rep["holds"] is not False, {"variant": rep["variant"]}

    run("paley-zygmund", pz)
    run("second-moment-supremum", pz2)
    run("fourth-moment-equivalence", lp)
    run("conditional-chain", chain)
    total = sum(r["violations"] for r in rows)
    return {"rows": rows, "violations_total": total, "failures": failures}


def cmd_orlicz_scan(args) -> dict:
    n = _require_n(args)
    budget = _budget(args)
    if args.d < 3:
        raise UsageError("--d must be at least 3 for the cross term scan")
    alpha = args.alpha if args.alpha is not None else 2.0 / 3.0
    if not 0 < alpha <= 2:
        raise UsageError("--alpha must lie in (0, 2]")
    grid = [n]
    if n >= 32:
        grid = []
        m = 32
        while m <= n:
            grid.append(m)
            m *= 2
    rows = []
    for gn in grid:
        if gn % args.q:
            raise UsageError(f"--q must divide every grid size, fails at {gn}")
        decomp = witness3d.BlockDecomposition.build(gn, args.d, args.q)
        signs = _signs(args)
        samples = witness3d.sqcap_samples(decomp, signs, 1, budget, args.seed)
        rep = probability.orlicz_report(samples, alpha)
        ratio = rep["k"] * math.sqrt(args.q) / gn ** 1.5
        rows.append({
            "n": gn,
            "q": args.q,
            "k": rep["k"],
            "ratio": ratio,
            "tail_share": rep["tail_share"],
            "samples": budget,
            "block_size": len(decomp.block(1)),
        })
    ratios = [r["ratio"] for r in rows]
    return {
        "rows": rows,
        "alpha": alpha,
        "ratio_spread": max(ratios) / min(ratios) if min(ratios) > 0 else None,
    }


def cmd_discrepancy(args) -> dict:
    token = args.points
    if token.startswith("vdc:"):
        try:
            k = int(token[4:])
        except ValueError as exc:
            raise UsageError(f"bad --points: {exc}") from exc
        if k < 1 or k > disc.MAX_VDC_BITS:
            raise UsageError(
                f"vdc resolution must lie in [1, {disc.MAX_VDC_BITS}]")
        ps = disc.van_der_corput(k)
    elif token.startswith("file:"):
        try:
            ps = disc.load_points(token[5:])
        except (OSError, ValueError) as exc:
            raise UsageError(f"bad --points: {exc}") from exc
    else:
        raise UsageError("--points must be vdc:K or file:PATH")
    report = disc.discrepancy_report(ps, budget=_budget(args), seed=args.seed)
    return report.to_json()


HANDLERS = {
    "eval": cmd_eval,
    "supnorm": cmd_supnorm,
    "witness2d": cmd_witness2d,
    "witness3d": cmd_witness3d,
    "identity-check": cmd_identity_check,
    "lemmas": cmd_lemmas,
    "orlicz-scan": cmd_orlicz_scan,
    "discrepancy": cmd_discrepancy,
}

CONFIG_KEYS = ("n", "d", "q", "tau", "seed", "restarts", "budget", "workers",
               "format", "point", "resolution", "method", "x2", "alpha",
               "points")


def _config(args) -> dict:
    cfg = {}
    for key in CONFIG_KEYS:
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    if cfg.get("budget") is None and hasattr(args, "budget"):
        cfg["budget"] = BUDGET_DEFAULTS.get(args.command, 100000)
    cfg["signs"] = args.signs if args.signs is not None else f"seed:{args.seed}"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        payload = HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"smallball: {exc}", file=sys.stderr)
        return 2
    except GuardRefusal as exc:
        print(f"smallball: guard refusal: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single exit point for bugs
        print(f"smallball: internal error: {exc}", file=sys.stderr)
        return 1
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    envelope = {
        "version": __version__,
        "command": args.command,
        "config": _config(args),
        "seed": args.seed,
        "elapsed_ms": round(elapsed_ms, 3),
        "result": payload,
    }
    if args.format == "json":
        text = json.dumps(envelope, sort_keys=True, indent=2) + "\n"
    else:
        from . import report
        text = report.to_csv(envelope)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        if not args.no_figures:
            from . import report
            stem = args.out.rsplit(".", 1)[0] if "." in args.out else args.out
            report.render_figure(envelope, stem + ".png")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
