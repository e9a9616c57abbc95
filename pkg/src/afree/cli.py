"""Command-line entry point: ``afree <group> <action> [flags]``.

Reports are JSON on stdout, artifacts go to ``--out`` paths.  Exit codes:
0 success, 1 internal error, 2 a check failed, 3 no certificate found,
64 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import balance as bal
from . import forms
from . import linalg
from . import lusin
from . import measures as ms
from . import sphere
from . import tree as tr
from . import witness as wt
from .operator import OperatorSpec, operators_equivalent, wave_cone_contains

EXIT_OK, EXIT_INTERNAL, EXIT_FAILED, EXIT_NOT_FOUND, EXIT_USAGE = 0, 1, 2, 3, 64
CSV_SCHEMA = "# schema=1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# I/O helpers


def _plain(x):
    """JSON-ready copy: numpy scalars and arrays become Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, Fraction):
        return wt.encode_entry(x)
    return x


def dumps(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text), hashlib.sha256(text.encode()).hexdigest()
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _load_operator(path, mode=None):
    obj, digest = _read_json(path)
    if "operator" in obj and "mats" not in obj:
        obj = obj["operator"]
    try:
        op = OperatorSpec.from_json(obj)
    except (ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
        raise UsageError(f"{path}: invalid operator spec: {exc}") from exc
    if mode == "float" and op.rational:
        op = op.as_float()
    return op, digest


def _load_witness(path):
    obj, digest = _read_json(path)
    try:
        w, op = wt.witness_from_json(obj)
    except (ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
        raise UsageError(f"{path}: invalid witness: {exc}") from exc
    return w, op, digest


def _load_suite(path, d, count, seed, default):
    if path is None:
        return default(d, count, seed), None
    obj, digest = _read_json(path)
    items = obj["test_functions"] if isinstance(obj, dict) else obj
    try:
        suite = [ms.test_function_from_json(t) for t in items]
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: invalid test-function suite: {exc}") from exc
    if any(len(phi.center) != d for phi in suite):
        raise UsageError(f"{path}: test functions must live in dimension {d}")
    return suite, digest


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _write_csv(path, header, rows, comments=()):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(CSV_SCHEMA + "\n")
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_value(v) for v in row])


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _check(name, passed, value=None, bound=None):
    return {"name": name, "passed": bool(passed), "value": value, "bound": bound}


def _report(args, inputs, checks, extra=None):
    rep = {"command": args.argv, "inputs": inputs, "checks": checks,
           "passed": all(c["passed"] for c in checks)}
    if extra:
        rep.update(extra)
    return rep


def _vector(text, name):
    try:
        vals = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--{name}: malformed JSON vector: {exc.msg}") from exc
    if not isinstance(vals, list):
        raise UsageError(f"--{name} must be a JSON list")
    return vals


# ---------------------------------------------------------------------------
# op


def cmd_op(args):
    op, digest = _load_operator(args.spec, args.mode)
    inputs = {"spec": digest}
    rows = np.concatenate(list(op.mats), axis=0)
    out = {
        "d": op.d, "m": op.m, "n": op.n, "mode": "rational" if op.rational else "float",
        "matrix_ranks": [linalg.rank(M) for M in op.mats],
        "stacked_rank": linalg.rank(rows),
    }
    if op.n == 1:
        r = linalg.rank(op.mats[0])
        out["balanceable"] = wt.scalar_condition_decision(op.mats[0])
        out["reason"] = (
            "rank-one scalar operators admit no certificate and fail balanceability for every k < d"
            if r == 1 else f"rank {r}: certificate exists over the standard basis"
            if r >= 2 else "zero operator"
        )
    if args.f:
        vectors = _vector(args.f, "f")
        cone = []
        for v in vectors:
            if len(v) != op.m:
                raise UsageError(f"wave-cone vector {v} must have {op.m} entries")
            vv = linalg.exact(v) if op.rational else np.asarray(v, dtype=float)
            cone.append({"f": v, "wave_cone": bool(wave_cone_contains(op, vv))})
        out["wave_cone"] = cone
    if args.other:
        other, d2 = _load_operator(args.other, args.mode)
        inputs["other"] = d2
        out["equivalent"] = bool(operators_equivalent(op, other))
    return EXIT_OK, _report(args, inputs, [], out)


# ---------------------------------------------------------------------------
# tree


def cmd_tree(args):
    try:
        # emitting needs every segment, so the materialisation guard applies
        tr.check_emittable(args.h, args.L)
        t = tr.build_gamma(args.h, args.L)
    except tr.ResourceLimitError as exc:
        raise UsageError(str(exc)) from exc
    masses = []
    checks = []
    for level, mass in enumerate(t.levelMasses, start=1):
        closed = tr.closed_form_level_mass(args.h, level)
        masses.append({"level": level, "mass": float(mass), "exact": repr(mass), "closed_form": repr(closed)})
        checks.append(_check(f"level_{level}_mass", mass == closed, float(mass), float(closed)))
    if args.out:
        out = Path(args.out)
        d = args.h + 1
        header = ["level", *[f"p{i}" for i in range(d)], *[f"q{i}" for i in range(d)], "weight"]
        _write_csv(out / "tree_segments.csv", header, t.to_csv_rows(),
                   ["one row per segment: level, start point, end point, scalar weight"])
        _write_csv(out / "tree_masses.csv", ["level", "mass", "closed_form"],
                   ([m["level"], m["mass"], m["closed_form"]] for m in masses),
                   ["level mass = sum of length x weight; closed form sqrt(h+1) / 2^level"])
    extra = {"h": args.h, "L": args.L, "segments": tr.segment_count(args.h, args.L), "masses": masses}
    rep = _report(args, {}, checks, extra)
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


# ---------------------------------------------------------------------------
# balance


def _scalar_matrix(op):
    if op.n != 1:
        raise UsageError("balancing needs a single-matrix operator (n = 1)")
    return op.mats[0]


def cmd_balance_cube(args):
    op, digest = _load_operator(args.A, args.mode)
    A = _scalar_matrix(op)
    try:
        res = bal.balance_basis_cube(A, args.j, args.k, args.L)
    except bal.RankConstraintError as exc:
        raise UsageError(str(exc)) from exc
    suite, sdig = _load_suite(args.suite, op.d, args.count, args.seed,
                              lambda d, c, s: ms.bump_suite(d, c, s, box=1.2))
    mu = res.combined()
    opf = op.as_float() if op.rational else op
    checks = []
    for i, phi in enumerate(suite):
        r = float(np.linalg.norm(ms.weak_apply(opf, mu, phi, args.order)))
        b = res.residual_bound(phi.lipschitz(), rigorous=args.rigorous) + args.slack
        checks.append(_check(f"residual_{i}", r <= b, r, b))
    if args.out:
        _write(args.out, dumps(mu.to_json()))
    inputs = {"A": digest, **({"suite": sdig} if sdig else {})}
    tv = ms.total_variation(res.sigma)
    rep = _report(args, inputs, checks, {"total_variation_sigma": tv, "direction": res.direction.tolist()})
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


def cmd_balance_grid(args):
    op, digest = _load_operator(args.A, args.mode)
    A = _scalar_matrix(op)
    obj, gdig = _read_json(args.grid)
    try:
        f = bal.GridFunction.from_json(obj, op.d, op.m)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{args.grid}: invalid grid function: {exc}") from exc
    try:
        sigma, mass_bound = bal.balance_grid(A, f, args.k, args.L)
    except (bal.RankConstraintError, NotImplementedError) as exc:
        raise UsageError(str(exc)) from exc
    tv = ms.total_variation(sigma)
    checks = [_check("mass", tv <= mass_bound * (1 + 1e-12), tv, mass_bound)]
    suite, sdig = _load_suite(args.suite, op.d, args.count, args.seed,
                              lambda d, c, s: ms.bump_suite(d, c, s, box=1.0))
    opf = op.as_float() if op.rational else op
    mu = bal.grid_source(f) + sigma
    res = [float(np.linalg.norm(ms.weak_apply(opf, mu, phi, args.order))) for phi in suite]
    if args.out:
        _write(args.out, dumps(sigma.to_json()))
    inputs = {"A": digest, "grid": gdig, **({"suite": sdig} if sdig else {})}
    rep = _report(args, inputs, checks, {"weak_residuals": res})
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


# ---------------------------------------------------------------------------
# witness


def _fixture(name):
    if name == "two-matrix":
        return wt.two_matrix_witness()
    if name.startswith("ext:"):
        try:
            d, q = (int(s) for s in name[4:].split(","))
        except ValueError as exc:
            raise UsageError("exterior fixtures are written ext:d,q") from exc
        try:
            op, _ = forms.build_ext_operator(d, q)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return op, forms.ext_condition_witness(d, q)
    raise UsageError(f"unknown fixture {name!r}; use two-matrix or ext:d,q")


def cmd_witness_verify(args):
    w, embedded, wdig = _load_witness(args.witness)
    inputs = {"witness": wdig}
    if args.op:
        op, odig = _load_operator(args.op, args.mode)
        inputs["op"] = odig
    elif embedded is not None:
        op = embedded
    else:
        raise UsageError("no operator: pass --op or embed one in the witness file")
    report = wt.verify_witness(op, w, args.tol)
    checks = [_check(k, v.passed, v.violation, args.tol) for k, v in report.checks.items()]
    rep = _report(args, inputs, checks)
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


def cmd_witness_construct(args):
    inputs = {}
    if args.fixture:
        op, w = _fixture(args.fixture)
    else:
        if not args.op:
            raise UsageError("pass --op or --fixture")
        op, inputs["op"] = _load_operator(args.op, args.mode)
        try:
            if op.n == 1:
                w = wt.scalar_witness(op.mats[0])
            else:
                w = wt.heuristic_witness_search(op, args.trials, args.seed, args.tol)
        except wt.NotRepresentable as exc:
            return EXIT_NOT_FOUND, _report(args, inputs, [], {"found": False, "reason": "not_representable",
                                                               "message": str(exc)})
        except wt.NotFound as exc:
            return EXIT_NOT_FOUND, _report(args, inputs, [], {"found": False, "reason": exc.reason,
                                                               "message": str(exc)})
    payload = wt.witness_to_json(w, op)
    if args.out:
        _write(args.out, dumps(payload))
    report = wt.verify_witness(op, w, 0 if op.rational else max(args.tol, 1e-8))
    checks = [_check(k, v.passed, v.violation) for k, v in report.checks.items()]
    rep = _report(args, inputs, checks, {"found": True, **({} if args.out else {"witness": payload})})
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


# ---------------------------------------------------------------------------
# sphere


def cmd_sphere(args):
    w, embedded, wdig = _load_witness(args.witness)
    inputs = {"witness": wdig}
    if args.op:
        op, inputs["op"] = _load_operator(args.op, args.mode)
    elif embedded is not None:
        op = embedded
    else:
        raise UsageError("no operator: pass --op or embed one in the witness file")
    if op.d not in (2, 3, 4):
        raise UsageError(f"sphere checks need d in 2..4, got {op.d}")
    try:
        cfs = sphere.correctors_for_witness(op, w)
    except sphere.UnverifiedWitnessError as exc:
        return EXIT_FAILED, _report(args, inputs, [_check("witness", False)], {"message": str(exc)})
    suite, sdig = _load_suite(args.suite, op.d, args.count, args.seed, sphere.sphere_suite)
    if sdig:
        inputs["suite"] = sdig
    exact = op.rational and not args.float_checks
    pointwise_tol = 0 if exact else args.pointwise_tol
    checks = []
    for i, (fr, cf) in enumerate(zip(w.fragments, cfs)):
        tan = sphere.check_tangency(op, cf, args.samples, args.seed, exact)
        div = sphere.check_surface_divergence(op, cf, args.samples, args.seed, exact)
        res = sphere.weak_balance_sphere(op, fr.f, cf, suite, args.order)
        checks.append(_check(f"fragment_{i}_tangency", tan <= pointwise_tol, float(tan), pointwise_tol))
        checks.append(_check(f"fragment_{i}_surface_divergence", div <= pointwise_tol, float(div), pointwise_tol))
        checks.append(_check(f"fragment_{i}_weak_balance", res <= args.residual_tol, res, args.residual_tol))
    rep = _report(args, inputs, checks)
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


# ---------------------------------------------------------------------------
# lusin


def _named_field(spec, d, m):
    """``x<i>f<k>`` (the field x_i e_k, 1-based) or ``const:v1,...,vm``."""
    if spec.startswith("const:"):
        v = np.array([float(s) for s in spec[6:].split(",")])
        if v.size != m:
            raise UsageError(f"constant field needs {m} entries")
        return lambda X: np.broadcast_to(v, (len(X), m)).copy()
    try:
        left, right = spec[1:].split("f")
        i, k = int(left), int(right)
    except ValueError as exc:
        raise UsageError(f"cannot parse field {spec!r}; use x<i>f<k> or const:v1,...") from exc
    if not spec.startswith("x") or not (1 <= i <= d and 1 <= k <= m):
        raise UsageError(f"field {spec!r} is out of range for d={d}, m={m}")

    def f(X):
        out = np.zeros((len(X), m))
        out[:, k - 1] = X[:, i - 1]
        return out

    return f


def _grid_field(obj, d, m):
    """Samples at the cell centers of a dyadic grid on (0, 1)^d, interpolated
    multilinearly (constant beyond the outermost centers)."""
    from scipy.interpolate import RegularGridInterpolator

    g = bal.GridFunction.from_json(obj, d, m)
    n = 1 << g.depth
    ticks = (np.arange(n) + 0.5) / n
    interp = RegularGridInterpolator([ticks] * d, g.values, method="linear", bounds_error=False, fill_value=None)
    return lambda X: interp(np.clip(X, ticks[0], ticks[-1]))


def cmd_lusin(args):
    w, embedded, wdig = _load_witness(args.witness)
    inputs = {"witness": wdig}
    if args.op:
        op, inputs["op"] = _load_operator(args.op, args.mode)
    elif embedded is not None:
        op = embedded
    else:
        raise UsageError("no operator: pass --op or embed one in the witness file")
    if (args.field is None) == (args.grid is None):
        raise UsageError("pass exactly one of --field and --grid")
    if args.field is not None:
        f = _named_field(args.field, op.d, op.m)
        inputs["field"] = args.field
    else:
        obj, inputs["grid"] = _read_json(args.grid)
        try:
            f = _grid_field(obj, op.d, op.m)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{args.grid}: invalid grid function: {exc}") from exc
    try:
        cov, h, report = lusin.lusin_approximate(op, w, f, args.eps, args.eta, resolution=args.resolution,
                                                 suite=lusin.lusin_suite(op.d, args.count, args.seed),
                                                 residual_tol=args.residual_tol)
    except lusin.PackingError as exc:
        return EXIT_FAILED, _report(args, inputs, [_check("uncovered_fraction", False, exc.achieved, args.eps)],
                                    {"message": str(exc)})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rj = report.to_json()
    bounds = {"uncovered_fraction": args.eps, "sup_error_on_K": args.eta, "weak_residual": args.residual_tol}
    values = {"uncovered_fraction": report.uncovered_fraction, "sup_error_on_K": report.sup_error_on_K,
              "weak_residual": report.weak_residual}
    for p, key in ((1, "norm_L1"), (2, "norm_L2"), (np.inf, "norm_Linf")):
        inv_p = 1 / p if np.isfinite(p) else 0.0
        values[key] = report.norms_h[p]
        bounds[key] = report.constants[p] * args.eps ** (inv_p - 1) * report.norms_f[p]
    checks = [_check(k, v, values[k], bounds[k]) for k, v in report.checks.items()]
    if args.out_covering:
        _write(args.out_covering, dumps(cov.to_json()))
    if args.out_samples:
        n = args.sample_resolution
        X, _ = lusin.grid_samples(lambda X: np.zeros((len(X), 1)), op.d, n)
        H = h(X)
        header = [*[f"x{i}" for i in range(op.d)], *[f"h{k}" for k in range(op.m)]]
        _write_csv(args.out_samples, header, (list(x) + list(v) for x, v in zip(X, H)),
                   [f"h sampled at the centers of a {n}^{op.d} grid on (0,1)^{op.d}"])
    rep = _report(args, inputs, checks, {k: rj[k] for k in ("eps", "eta", "beta", "delta", "balls", "constants")})
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


# ---------------------------------------------------------------------------
# forms


def cmd_forms_build(args):
    try:
        op, frame = forms.build_ext_operator(args.d, args.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        _write(args.out, dumps(op.to_json()))
    extra = {"sources": [list(I.entries) for I in frame.sources],
             "targets": [list(J.entries) for J in frame.targets]}
    if not args.out:
        extra["operator"] = op.to_json()
    checks = [_check(f"rank_{'_'.join(map(str, J.entries))}", linalg.rank(M) == args.d - args.q + 1,
                     linalg.rank(M), args.d - args.q + 1) for J, M in zip(frame.targets, op.mats)]
    if 1 <= args.q <= args.d - 2:
        worst = forms.symbol_complex_check(args.d, args.q, seed=args.seed)
        checks.append(_check("symbol_complex", worst == 0, float(worst), 0))
    rep = _report(args, {}, checks, extra)
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


def cmd_forms_witness(args):
    try:
        op, _ = forms.build_ext_operator(args.d, args.q)
        if args.index:
            I = tuple(int(s) for s in args.index.split(","))
            w = wt.Witness([forms.exterior_witness(args.d, args.q, I)])
        else:
            w = forms.ext_condition_witness(args.d, args.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    payload = wt.witness_to_json(w, op)
    if args.out:
        _write(args.out, dumps(payload))
    # a single fragment is checked on its own; the basis check needs all of them
    report = wt.verify_witness(op, w.fragments[0] if args.index else w, 0)
    checks = [_check(k, v.passed, v.violation, 0) for k, v in report.checks.items()]
    rep = _report(args, {}, checks, {} if args.out else {"witness": payload})
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), rep


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--mode", choices=("rational", "float"), default=None,
                        help="arithmetic for operator inputs (default: as stored)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap; every stage currently runs on one worker")
    common.add_argument("--timing", action="store_true", help="add wall time to the report")

    p = _Parser(prog="afree", description="Balanced and A-free measure constructions with checks.")
    groups = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    op = groups.add_parser("op", help="operator ranks, wave cone, equivalence").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = op.add_parser("check", parents=[common])
    c.add_argument("spec")
    c.add_argument("--f", help="JSON list of vectors to test for wave-cone membership")
    c.add_argument("--other", help="second operator spec for the equivalence test")
    c.set_defaults(func=cmd_op)

    t = groups.add_parser("tree", help="branched tree export").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = t.add_parser("emit", parents=[common])
    c.add_argument("--h", type=int, required=True)
    c.add_argument("--L", type=int, required=True)
    c.add_argument("--out", help="directory for tree_segments.csv and tree_masses.csv")
    c.set_defaults(func=cmd_tree)

    b = groups.add_parser("balance", help="balancing measures").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = b.add_parser("cube", parents=[common])
    c.add_argument("--A", required=True)
    c.add_argument("--j", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--L", type=int, default=10)
    c.add_argument("--order", type=int, default=ms.DEFAULT_ORDER)
    c.add_argument("--suite")
    c.add_argument("--count", type=int, default=10)
    c.add_argument("--slack", type=float, default=1e-9)
    c.add_argument("--rigorous", action="store_true", help="use the bound including the leaf offset")
    c.add_argument("--out")
    c.set_defaults(func=cmd_balance_cube)
    c = b.add_parser("grid", parents=[common])
    c.add_argument("--A", required=True)
    c.add_argument("--grid", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--L", type=int, default=6)
    c.add_argument("--order", type=int, default=8)
    c.add_argument("--suite")
    c.add_argument("--count", type=int, default=4)
    c.add_argument("--out")
    c.set_defaults(func=cmd_balance_grid)

    w = groups.add_parser("witness", help="certificates").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = w.add_parser("verify", parents=[common])
    c.add_argument("witness")
    c.add_argument("--op")
    c.add_argument("--tol", type=float, default=0.0)
    c.set_defaults(func=cmd_witness_verify)
    c = w.add_parser("construct", parents=[common])
    c.add_argument("--op")
    c.add_argument("--fixture", help="two-matrix or ext:d,q")
    c.add_argument("--trials", type=int, default=10_000)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--out")
    c.set_defaults(func=cmd_witness_construct)

    s = groups.add_parser("sphere", help="corrector checks").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = s.add_parser("check", parents=[common])
    c.add_argument("witness")
    c.add_argument("--op")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--order", type=int, default=32)
    c.add_argument("--suite")
    c.add_argument("--count", type=int, default=12)
    c.add_argument("--pointwise-tol", type=float, default=1e-12)
    c.add_argument("--residual-tol", type=float, default=1e-6)
    c.add_argument("--float-checks", action="store_true", help="float identities even for rational input")
    c.set_defaults(func=cmd_sphere)

    lu = groups.add_parser("lusin", help="A-free approximation").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = lu.add_parser("run", parents=[common])
    c.add_argument("witness")
    c.add_argument("--op")
    c.add_argument("--field", help="x<i>f<k> or const:v1,...,vm")
    c.add_argument("--grid", help="grid function JSON sampled on (0,1)^d")
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--eta", type=float, required=True)
    c.add_argument("--resolution", type=int, default=512)
    c.add_argument("--count", type=int, default=8)
    c.add_argument("--residual-tol", type=float, default=1e-6)
    c.add_argument("--out-covering")
    c.add_argument("--out-samples")
    c.add_argument("--sample-resolution", type=int, default=64)
    c.set_defaults(func=cmd_lusin)

    fo = groups.add_parser("forms", help="exterior derivative operators").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = fo.add_parser("build", parents=[common])
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_forms_build)
    c = fo.add_parser("witness", parents=[common])
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--index", help="comma-separated multi-index; default: the whole basis")
    c.add_argument("--out")
    c.set_defaults(func=cmd_forms_witness)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    start = time.perf_counter()
    try:
        code, report = args.func(args)
    except UsageError as exc:
        print(f"afree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # internal failures map to exit 1 with a message
        print(f"afree: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.timing:
        report["wall_time"] = time.perf_counter() - start
    sys.stdout.write(dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
