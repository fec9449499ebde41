"""Command-line entry point ``oqw``.

Subcommands: ``prob``, ``gambler``, ``simulate``, ``drift``, ``count`` and
``kmcg``.  Exit codes: 0 success, 2 inapplicable route, 3 numerical
certification failure, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import drift as dr
from .channel import (
    BoundaryCondition,
    NearestNeighborRule,
    NormalizationError,
    build_channel,
    channel_for_query,
    monte_carlo_hitting,
    transition_probability,
)
from .errors import CertificationError, InapplicableRouteError, NotAbsorbingError, QuadratureError
from .firstvisit import (
    absorption_functionals,
    absorption_stats,
    degenerate_rotation,
    rotation_closed_form,
    rotation_rule,
    segment_from_rule,
)
from .latticegf import hadamard_closed_form_affine, hadamard_ruin_affine
from .linalg import DensityMatrix, InvalidDensityError, bloch_matrix, matrix_from_json
from .measure import check_dette_conditions, km_model
from .paths import catalan, count_paths, count_paths_dp, path_count_probability
from .walkspec import SpecError, load_rule

EXIT_OK = 0
EXIT_INAPPLICABLE = 2
EXIT_CERTIFICATION = 3
EXIT_CONFIG = 4

DEFAULT_TOL = 1e-8
GOLDEN_DIGITS = 12

HADAMARD_L = np.array([[0, 0], [1, -1]]) / np.sqrt(2)
HADAMARD_R = np.array([[1, 1], [0, 0]]) / np.sqrt(2)


class ConfigError(ValueError):
    """Invalid command-line or config-file input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ------------------------------------------------------------------ parsing


def parse_rho(text: str | None, order: int) -> DensityMatrix:
    """Density from ``mixed``, ``e<k>``, ``bloch:x,y,z``, ``diag:p1,...`` or a JSON matrix."""
    if text is None or text == "mixed":
        return DensityMatrix(np.eye(order) / order)
    try:
        if text.startswith("e") and text[1:].isdigit():
            return DensityMatrix.basis(order, int(text[1:]))
        if text.startswith("bloch:"):
            if order != 2:
                raise ConfigError("bloch densities need order 2")
            x, y, z = (float(v) for v in text[6:].split(","))
            return DensityMatrix(bloch_matrix(x, y, z))
        if text.startswith("diag:"):
            vals = [float(v) for v in text[5:].split(",")]
            return DensityMatrix(np.diag(vals))
        mat = matrix_from_json(json.loads(text))
    except (ValueError, TypeError, KeyError, IndexError, InvalidDensityError) as exc:
        raise ConfigError(f"bad --rho {text!r}: {exc}") from exc
    if mat.shape != (order, order):
        raise ConfigError(f"--rho must have order {order}")
    try:
        return DensityMatrix(mat)
    except InvalidDensityError as exc:
        raise ConfigError(f"bad --rho: {exc}") from exc


def parse_sites(text: str) -> list:
    """``"0..5"``, ``"0,2,4"`` or a single integer."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad site list {text!r}") from exc


def parse_h(text: str):
    if text == "linear":
        return dr.linear_h
    if text == "quadratic":
        return dr.quadratic_h
    try:
        table = {int(k): float(v) for k, v in json.loads(text).items()}
    except (ValueError, AttributeError) as exc:
        raise ConfigError("--h must be linear, quadratic or a JSON object site -> value") from exc

    def h(i: int) -> float:
        if i not in table:
            raise ConfigError(f"--h table has no value for site {i}")
        return table[i]

    return h


def _rule(args) -> NearestNeighborRule:
    if not args.spec:
        raise ConfigError("--spec is required for this subcommand")
    return load_rule(args.spec)


def _sig(v) -> str:
    if isinstance(v, float):
        return f"{v:.{GOLDEN_DIGITS}g}"
    return str(v)


# ----------------------------------------------------------------- commands


def _prob_routes(rule, rho, i, j, n):
    routes = {
        "block": lambda: transition_probability(channel_for_query(rule, i, j, n), rho, i, j, n),
        "kmcg": lambda: km_model(rule).probability(rho, i, j, n),
        "count": lambda: path_count_probability(rule, rho, i, j, n),
    }
    return routes


def cmd_prob(args) -> dict:
    rule = _rule(args)
    rho = parse_rho(args.rho, rule.N)
    routes = _prob_routes(rule, rho, args.i, args.j, args.n)
    query = {"i": args.i, "j": args.j, "n": args.n}
    if not args.all_routes:
        return {"route": args.route, **query, "probability": routes[args.route]()}
    values, skipped = {}, {}
    for name, fn in routes.items():
        try:
            values[name] = fn()
        except InapplicableRouteError as exc:
            skipped[name] = str(exc)
    names = sorted(values)
    diffs = {f"{a}-{b}": abs(values[a] - values[b]) for x, a in enumerate(names) for b in names[x + 1 :]}
    worst = max(diffs.values(), default=0.0)
    out = {**query, "probabilities": values, "inapplicable": skipped,
           "pairwise_diff": diffs, "max_discrepancy": worst, "tol": args.tol}
    if worst > args.tol:
        raise CertificationError(f"routes disagree by {worst:.3g} > {args.tol:.3g}")
    return out


def _is_hadamard(rule) -> bool:
    return bool(np.allclose(rule.L, HADAMARD_L, atol=1e-12) and np.allclose(rule.R, HADAMARD_R, atol=1e-12)
                and rule.B is None)


def _gambler_rule(args):
    """``(rule, family)`` with ``family`` in ``{"hadamard", "rotation", None}``."""
    picks = sum(bool(x) for x in (args.hadamard, args.rotation is not None, args.spec))
    if picks != 1:
        raise ConfigError("give exactly one of --hadamard, --rotation T, --spec")
    if args.M < 3:
        raise ConfigError("--M must be >= 3")
    seg = BoundaryCondition.segment(args.M)
    if args.hadamard:
        return NearestNeighborRule(HADAMARD_L, HADAMARD_R, boundary=seg), "hadamard"
    if args.rotation is not None:
        L, R = rotation_rule(args.rotation)
        return NearestNeighborRule(L, R, boundary=seg), "rotation"
    base = _rule(args)
    rule = NearestNeighborRule(base.L, base.R, base.B, seg)
    return rule, "hadamard" if _is_hadamard(rule) else None


def _gambler_route(route, rule, family, args, rho, k) -> dict:
    M = args.M
    if route == "resolvent":
        return absorption_stats(segment_from_rule(rule), rho, k).as_dict()
    if route == "gf":
        if family != "hadamard":
            raise InapplicableRouteError("gf route requires the Hadamard walk")
        p, e, ruin = hadamard_ruin_affine(k, M)
        x = rho.re12
        return {"p": p(x), "E": e(x), "p_ruin": ruin(x)}
    if route == "closed":
        if family == "hadamard":
            p, e = hadamard_closed_form_affine(k, M)
            x = rho.re12
            return {"p": p(x), "E": e(x), "p_ruin": 1 - p(x)}
        if family == "rotation":
            t = args.rotation
            res = degenerate_rotation(t, M, k, rho) if t in (0, 1) else rotation_closed_form(t, M, k, rho)
            return {"p": res.p_reach, "E": res.expected_time, "p_ruin": res.p_ruin}
        raise InapplicableRouteError("closed route requires the Hadamard walk or the rotation family")
    if route == "montecarlo":
        est = monte_carlo_hitting(rule, rho, k, {0, M}, args.trials, seed=args.seed, step_cap=args.step_cap)
        p, se = est.probability_of(M)
        return {"p": p, "p_stderr": se, "E": est.mean_time, "E_stderr": est.mean_time_stderr,
                "p_ruin": est.probability_of(0)[0], "censored": est.censored, "trials": est.trials}
    raise ConfigError(f"unknown route {route!r}")


def _tables(args, family, rule) -> dict:
    route = args.route
    rows = []
    for M in range(3, 8):
        if route in ("gf", "closed"):
            if family != "hadamard":
                raise InapplicableRouteError(f"{route} tables require the Hadamard walk")
        seg = segment_from_rule(NearestNeighborRule(rule.L, rule.R, rule.B, BoundaryCondition.segment(M)))
        for k in range(1, M):
            if route == "gf":
                p, e, _ = hadamard_ruin_affine(k, M)
                vals = (p.const, p.coeff, e.const, e.coeff)
            elif route == "closed":
                p, e = hadamard_closed_form_affine(k, M)
                vals = (p.const, p.coeff, e.const, e.coeff)
            elif route == "resolvent":
                f = absorption_functionals(seg, k)
                pc, ec = f.reach_coords(), f.time_coords()
                # affine in Re(rho12) only when the diagonal coefficients agree
                vals = (pc["rho11"], pc["re12"], ec["rho11"], ec["re12"])
                if abs(pc["rho11"] - pc["rho22"]) > 1e-9 or abs(ec["rho11"] - ec["rho22"]) > 1e-9:
                    raise InapplicableRouteError("walk is not affine in Re(rho12) alone")
                # round-off on coefficients that vanish exactly
                vals = tuple(0.0 if abs(v) < 1e-12 else v for v in vals)
            else:
                raise ConfigError("--tables supports routes gf, closed and resolvent")
            rows.append({"M": M, "k": k,
                         "p_const": str(vals[0]) if isinstance(vals[0], Fraction) else vals[0],
                         "p_coeff": str(vals[1]) if isinstance(vals[1], Fraction) else vals[1],
                         "E_const": str(vals[2]) if isinstance(vals[2], Fraction) else vals[2],
                         "E_coeff": str(vals[3]) if isinstance(vals[3], Fraction) else vals[3]})
    return {"route": route, "affine_in": "Re(rho12)", "rows": rows}


def cmd_gambler(args) -> dict:
    rule, family = _gambler_rule(args)
    if args.tables:
        return _tables(args, family, rule)
    if not 1 <= args.k <= args.M - 1:
        raise ConfigError("--k must satisfy 1 <= k <= M-1")
    rho = parse_rho(args.rho, rule.N)
    if not args.all_routes:
        return {"route": args.route, "M": args.M, "k": args.k, **_gambler_route(args.route, rule, family, args, rho, args.k)}
    results, skipped = {}, {}
    for route in ("resolvent", "gf", "closed", "montecarlo"):
        try:
            results[route] = _gambler_route(route, rule, family, args, rho, args.k)
        except InapplicableRouteError as exc:
            skipped[route] = str(exc)
    exact = [r for r in results if r != "montecarlo"]
    diffs = {f"{a}-{b}": max(abs(results[a]["p"] - results[b]["p"]), abs(results[a]["E"] - results[b]["E"]))
             for x, a in enumerate(exact) for b in exact[x + 1 :]}
    worst = max(diffs.values(), default=0.0)
    out = {"M": args.M, "k": args.k, "routes": results, "inapplicable": skipped,
           "pairwise_diff": diffs, "max_discrepancy": worst}
    if "montecarlo" in results and "resolvent" in results:
        mc, rv = results["montecarlo"], results["resolvent"]
        out["montecarlo_z"] = {
            "p": (mc["p"] - rv["p"]) / mc["p_stderr"] if mc["p_stderr"] > 0 else 0.0,
            "E": (mc["E"] - rv["E"]) / mc["E_stderr"] if mc["E_stderr"] > 0 else 0.0,
        }
    if worst > args.tol:
        raise CertificationError(f"routes disagree by {worst:.3g} > {args.tol:.3g}")
    return out


def cmd_simulate(args) -> dict:
    rule = _rule(args)
    if args.M is not None:
        rule = NearestNeighborRule(rule.L, rule.R, rule.B, BoundaryCondition.segment(args.M))
    rho = parse_rho(args.rho, rule.N)
    if args.targets:
        targets = parse_sites(args.targets)
    elif rule.boundary.kind == "segment":
        targets = [0, rule.boundary.M]
    else:
        raise ConfigError("--targets is required on the half-line")
    est = monte_carlo_hitting(rule, rho, args.i0, targets, args.trials, seed=args.seed, step_cap=args.horizon)
    absorbed = est.trials - sum(est.hits.values()) - est.censored
    rows = [{"outcome": f"hit {s}", "count": c, "fraction": c / est.trials} for s, c in est.hits.items()]
    rows.append({"outcome": "absorbed", "count": absorbed, "fraction": absorbed / est.trials})
    rows.append({"outcome": "running", "count": est.censored, "fraction": est.censored / est.trials})
    p_each = {str(s): dict(zip(("p", "stderr"), est.probability_of(s))) for s in est.hits}
    return {"i0": args.i0, "trials": est.trials, "seed": args.seed, "horizon": args.horizon,
            "hit_probability": est.estimate, "hit_stderr": est.stderr,
            "mean_time": est.mean_time, "mean_time_stderr": est.mean_time_stderr,
            "per_target": p_each, "rows": rows}


def _grid(args, rule):
    if args.grid_kind == "reachable":
        return dr.DensityGrid.reachable(rule, depth=args.depth)
    return dr.DensityGrid.default(rule.N, args.grid, seed=args.seed)


def cmd_drift(args) -> dict:
    rule = _rule(args)
    h = parse_h(args.h)
    window = parse_sites(args.window)
    F = parse_sites(args.F)
    grid = _grid(args, rule)
    out = {"grid": grid.scope}
    checks = ("foster", "pakes", "lamperti") if args.check == "all" else (args.check,)
    for c in checks:
        if c == "foster":
            rep = dr.foster_check(rule, dr.LyapunovSpec(h, F, args.epsilon), window, grid)
        elif c == "pakes":
            rep = dr.pakes_check(rule, window, grid, args.epsilon)
        else:
            rep = dr.lamperti_check(rule, window, grid, epsilon=args.epsilon)
        out[c] = rep.as_dict()
    if rule.N == 2:
        seed = DensityMatrix.basis(2, 0)
        try:
            prof = dr.orbit_drift_profile(rule, seed, args.depth)
            tail = [p.drift for p in prof[1:]]
            out["orbit"] = {"seed": "e0", "iterates": len(tail), "seed_drift": prof[0].drift,
                            "sup_iterate_drift": max(tail) if tail else None}
        except Exception as exc:  # dead branch; report rather than fail
            out["orbit"] = {"error": str(exc)}
    out["verdict"] = out[checks[0]]["verdict"]
    return out


def cmd_count(args) -> dict:
    c = count_paths(args.i, args.j, args.n)
    out = {"i": args.i, "j": args.j, "n": args.n, "count": c}
    if args.check:
        d = count_paths_dp(args.i, args.j, args.n)
        out["dp_count"] = d
        if d != c:
            raise CertificationError(f"closed-form count {c} != enumeration {d}")
    if args.i == 0 and args.j == 0 and args.n % 2 == 0:
        out["catalan"] = catalan(args.n // 2)
    return out


def cmd_kmcg(args) -> dict:
    rule = _rule(args)
    model = km_model(rule)
    m = model.measure
    lo, hi = m.support()
    out = {"case": model.case, "order": m.order, "support": [lo, hi],
           "breakpoints": [float(b) for b in m.breakpoints()], "commuting": m.commuting}
    if rule.B is None and rule.boundary.kind == "absorbing":
        rep = check_dette_conditions(build_channel(rule, args.depth + 2), model.symmetrizer, args.depth)
        out["dette"] = {"passed": rep.passed, "depth": rep.depth, "max_residual": rep.max_residual,
                        "first_failure": rep.first_failure, "failed_condition": rep.failed_condition}
    if args.x is not None:
        w = m.density(args.x)
        out["density_trace_relevant"] = [float(w[a, a].real) for a in range(0, m.order, int(np.sqrt(m.order)) + 1)]
    out["moment0_trace"] = float(np.trace(m.moment(0)).real)
    return out


# ------------------------------------------------------------------- output


def _rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _sig(v) for k, v in r.items()})
    return buf.getvalue()


def _flatten(d: dict, prefix: str = "") -> list:
    items = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            items += _flatten(v, key + ".")
        elif k == "rows":
            continue
        else:
            items.append((key, v))
    return items


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, default=_json_default) + "\n"
    rows = payload.get("rows")
    if fmt == "csv":
        if rows:
            return _rows_to_csv(rows)
        return _rows_to_csv([{"key": k, "value": v} for k, v in _flatten(payload)])
    # table
    if rows:
        cols = list(rows[0])
        cells = [[_sig(r[c]) for c in cols] for r in rows]
        width = [max(len(c), *(len(row[x]) for row in cells)) for x, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, width))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, width)) for row in cells]
        return "\n".join(lines) + "\n"
    pairs = _flatten(payload)
    kw = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k.ljust(kw)}  {_sig(v) if not isinstance(v, (list, tuple)) else json.dumps(v, default=_json_default)}"
                     for k, v in pairs) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ------------------------------------------------------------------ parsers


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--spec", help="walk-spec JSON file or bundled name")
    common.add_argument("--format", choices=("json", "csv", "table"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="route-agreement tolerance")
    common.add_argument("--out", help="write output to this file")
    common.add_argument("--config", help="JSON file of option defaults (unknown keys are errors)")

    p = _Parser(prog="oqw", description="Open quantum walk computations")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("prob", parents=[common], help="n-step transition probability")
    q.add_argument("--i", type=int)
    q.add_argument("--j", type=int)
    q.add_argument("--n", type=int)
    q.add_argument("--rho", default=None)
    q.add_argument("--route", choices=("block", "kmcg", "count"), default="block")
    q.add_argument("--all-routes", action="store_true")
    q.set_defaults(func=cmd_prob)

    g = sub.add_parser("gambler", parents=[common], help="gambler's ruin on {0..M}")
    g.add_argument("--hadamard", action="store_true")
    g.add_argument("--rotation", type=float, default=None, metavar="T")
    g.add_argument("--M", type=int, default=3)
    g.add_argument("--k", type=int, default=1)
    g.add_argument("--rho", default=None)
    g.add_argument("--route", choices=("resolvent", "gf", "closed", "montecarlo"), default="resolvent")
    g.add_argument("--all-routes", action="store_true")
    g.add_argument("--tables", action="store_true", help="affine coefficients for M = 3..7")
    g.add_argument("--trials", type=int, default=20000)
    g.add_argument("--step-cap", type=int, default=10**5)
    g.set_defaults(func=cmd_gambler)

    s = sub.add_parser("simulate", parents=[common], help="sample quantum trajectories")
    s.add_argument("--i0", type=int)
    s.add_argument("--rho", default=None)
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--horizon", type=int, default=10**5)
    s.add_argument("--targets", default=None)
    s.add_argument("--M", type=int, default=None, help="run on the segment {0..M}")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("drift", parents=[common], help="Foster / Pakes / Lamperti checks")
    d.add_argument("--h", default="linear")
    d.add_argument("--F", default="0")
    d.add_argument("--window", default="0..20")
    d.add_argument("--epsilon", type=float, default=dr.DEFAULT_EPSILON)
    d.add_argument("--grid", type=int, default=500)
    d.add_argument("--grid-kind", choices=("full", "reachable"), default="full")
    d.add_argument("--depth", type=int, default=50, help="orbit length / reachable-set depth")
    d.add_argument("--check", choices=("foster", "pakes", "lamperti", "all"), default="all")
    d.set_defaults(func=cmd_drift)

    c = sub.add_parser("count", parents=[common], help="half-line path counts")
    c.add_argument("--i", type=int)
    c.add_argument("--j", type=int)
    c.add_argument("--n", type=int)
    c.add_argument("--check", action="store_true", help="compare with enumeration")
    c.set_defaults(func=cmd_count)

    k = sub.add_parser("kmcg", parents=[common], help="spectral measure of a walk")
    k.add_argument("--x", type=float, default=None)
    k.add_argument("--depth", type=int, default=10)
    k.set_defaults(func=cmd_kmcg)
    p.subcommands = dict(sub.choices)
    return p


REQUIRED = {"prob": ("i", "j", "n"), "count": ("i", "j", "n"), "simulate": ("i0",)}


def parse_args(argv: list) -> argparse.Namespace:
    """Parse the command line, merge ``--config`` defaults and check required options."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        subparser = parser.subcommands[args.command]
        known = set(vars(args)) - {"func", "command", "config"}
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            # command-line values win over the config file
            if getattr(args, dest) == subparser.get_default(dest):
                setattr(args, dest, val)
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k) is None]
    if missing:
        raise ConfigError(f"missing required options: {', '.join('--' + m for m in missing)}")
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = None
    try:
        args = parse_args(argv)
        payload, code = args.func(args), EXIT_OK
    except InapplicableRouteError as exc:
        payload, code = {"error": "inapplicable", "message": str(exc)}, EXIT_INAPPLICABLE
    except (CertificationError, QuadratureError, NotAbsorbingError, AssertionError) as exc:
        payload, code = {"error": "certification", "message": str(exc)}, EXIT_CERTIFICATION
    except (ConfigError, SpecError, NormalizationError, InvalidDensityError, ValueError) as exc:
        payload, code = {"error": "config", "message": str(exc)}, EXIT_CONFIG
    fmt = args.format if args is not None and code == EXIT_OK else "json"
    text = render(payload, fmt)
    if args is not None and args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK:
        sys.stderr.write(f"oqw: {payload['message']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
