"""Command-line entry point.

Every subcommand prints its artifact to stdout and, when an output directory
is configured (``--out`` or the ``GERBRACE_OUT_DIR`` environment variable),
also writes it to ``<dir>/<command>.<format>``.  Exit codes: 0 when every
check passes, 1 when an invariant is violated, 2 on bad arguments or input.

Settings may come from ``--config FILE`` (JSON object or ``key=value``
lines); flags given on the command line win.  With ``GERBRACE_CI`` set to a
non-empty value the seed is mandatory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .core_algebra import ArgumentError, InvariantViolation

OUT_ENV = "GERBRACE_OUT_DIR"
CI_ENV = "GERBRACE_CI"

_DEFAULTS = {"dims": 1, "t_degrees": None, "degcap": 2, "arity_cap": 3, "neutral_cap": 2,
             "depth": None, "seed": None, "out": None, "format": None}


@dataclass
class RunConfig:
    command: str
    dims: int = 1
    t_degrees: tuple[int, ...] = ()
    degcap: int = 2
    arity_cap: int = 3
    neutral_cap: int = 2
    depth: int | None = None
    seed: int = 0
    out: Path | None = None
    format: str = "text"
    params: dict = field(default_factory=dict)

    def context(self):
        from .polyvector_hochschild import AffineContext

        return AffineContext(self.dims, self.t_degrees, degcap=self.degcap, arity_cap=self.arity_cap)


@dataclass
class Outcome:
    ok: bool
    payload: dict | list
    text: str
    rows: list | None = None  # CSV rows, header first
    counterexample: object = None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in str(text).replace(" ", "").split(",") if p)
    except ValueError:
        raise ArgumentError(f"expected a comma separated list of integers, got {text!r}") from None


def read_config(path: str) -> dict:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ArgumentError(f"cannot read config {path}: {exc.strerror}") from None
    if raw.lstrip().startswith("{"):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    else:
        data = {}
        for lineno, line in enumerate(raw.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ArgumentError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            data[k] = v
    out = {}
    for k, v in data.items():
        key = k.replace("-", "_")
        if key not in _DEFAULTS:
            raise ArgumentError(f"{path}: unknown setting {k!r}")
        out[key] = v
    return out


def build_config(args: argparse.Namespace, env: dict | None = None) -> RunConfig:
    env = os.environ if env is None else env
    file_values = read_config(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key, default in _DEFAULTS.items():
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else file_values.get(key, default)
    try:
        dims = int(merged["dims"])
        degcap, arity_cap, neutral_cap = (int(merged[k]) for k in ("degcap", "arity_cap", "neutral_cap"))
        depth = None if merged["depth"] is None else int(merged["depth"])
        seed = merged["seed"]
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"bad numeric setting: {exc}") from None
    if env.get(CI_ENV) and seed is None:
        raise ArgumentError(f"a seed is mandatory when {CI_ENV} is set")
    t = _int_list(merged["t_degrees"]) if merged["t_degrees"] not in (None, "") else ()
    if dims < 1 or degcap < 1 or arity_cap < 1 or neutral_cap < 0 or (depth is not None and depth < 1):
        raise ArgumentError("dims, degcap, arity cap and depth must be positive")
    if t and len(t) != dims:
        raise ArgumentError(f"--t-degrees lists {len(t)} degrees for {dims} dimensions")
    out = merged["out"] or env.get(OUT_ENV) or None
    fmt = merged["format"] or COMMANDS[args.command][2]
    if fmt not in ("json", "csv", "text"):
        raise ArgumentError(f"unknown format {fmt!r}")
    params = {k: v for k, v in vars(args).items() if k not in _DEFAULTS and k not in ("config", "command")}
    return RunConfig(args.command, dims, t, degcap, arity_cap, neutral_cap, depth,
                     int(seed) if seed is not None else 0, Path(out) if out else None, fmt, params)


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _strip_timing(obj):
    # wall-clock figures would break byte-identical artifacts
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _context_json(cfg: RunConfig) -> dict:
    ctx = cfg.context()
    return {"dims": ctx.d, "t_degrees": list(ctx.t), "degcap": ctx.degcap, "arity_cap": ctx.arity_cap}


# ---------------------------------------------------------------------------
# commands


def cmd_ger_basis(cfg: RunConfig) -> Outcome:
    from .free_gerstenhaber import enumerate_basis, format_monomial, monomial_degree, monomial_to_json

    n = cfg.params["n"]
    basis = enumerate_basis(n)
    rows = [["monomial", "degree"]] + [[format_monomial(m), monomial_degree(m)] for m in basis]
    payload = {"n": n, "size": len(basis),
               "basis": [{"monomial": format_monomial(m), "degree": monomial_degree(m),
                          "tree": monomial_to_json(m)} for m in basis]}
    return Outcome(True, payload, "\n".join(format_monomial(m) for m in basis), rows)


def cmd_braces_audit(cfg: RunConfig) -> Outcome:
    from .brace_operad import check_d_squared

    rep = check_d_squared(cfg.params["n"], cfg.neutral_cap)
    payload = rep.to_json()
    rows = [["tree", "d2"]] + [[v["tree"], v["d2"]] for v in rep.violations]
    text = f"arity {rep.arity}, neutral cap {rep.max_neutral}: {rep.trees_checked} trees, " \
           f"{len(rep.violations)} violations"
    return Outcome(rep.ok, payload, text, rows, rep.violations[0] if rep.violations else None)


def _read_tree(source: str):
    from .brace_operad import BraceElement, parse_tree, tree_from_json

    if Path(source).is_file():
        data = _load_json(source)
        if isinstance(data, dict) and "terms" in data:
            return BraceElement.from_json(data)
        if isinstance(data, dict):
            return tree_from_json(data)
        if isinstance(data, str):
            return parse_tree(data)
        raise ArgumentError(f"{source}: expected a tree object, a brace element or a tree string")
    return parse_tree(source)


def cmd_brace_eval(cfg: RunConfig) -> Outcome:
    from .polydiff import PolyDiffOp
    from .polyvector_hochschild import brace_eval

    ring = cfg.context().a_ring
    tree = _read_tree(cfg.params["tree"])
    data = _load_json(cfg.params["ops"])
    if not isinstance(data, list):
        raise ArgumentError(f"{cfg.params['ops']}: expected a JSON list of operators")
    ops = []
    for j, item in enumerate(data):
        try:
            ops.append(PolyDiffOp.from_json(ring, item))
        except (KeyError, TypeError, ValueError) as exc:
            raise ArgumentError(f"{cfg.params['ops']}: operator {j}: {exc}") from None
    value = brace_eval(tree, ops)
    return Outcome(True, {"context": _context_json(cfg), "value": value.to_json()}, value.format())


def _mu_comma(ctx):
    from .convolution_linfty import ConvElement
    from .polyvector_hochschild import bracket_operator

    return ConvElement.of(bracket_operator(ctx), ((1,), (2,)))


def cmd_rigidity(cfg: RunConfig) -> Outcome:
    from .rigidity_verifier import rigidity_solve, verify_rigidity

    ctx = cfg.context()
    n = cfg.params["n"]
    order_cap = cfg.params.get("order_cap") or 1
    rep = verify_rigidity(ctx, n, coef_cap=cfg.degcap, order_cap=order_cap)
    payload = {"context": _context_json(cfg), "replay": "gerbrace replay <this file>"}
    payload.update(rep.to_json())
    if n == 2:
        # the bracket half of α is the differential of the Euler vector field
        payload["featured"] = rigidity_solve(_mu_comma(ctx), ctx).to_json()
    rows = [["index", "method", "ok"]] + [[j, r.method, "yes" if r.ok else "no"] for j, r in enumerate(rep.results)]
    text = f"d={ctx.d} arity {n} caps ({cfg.degcap},{order_cap}): {len(rep.results)} basis cocycles, " \
           f"{len(rep.failures)} without primitive"
    first = rep.failures[0].to_json() if rep.failures else None
    return Outcome(rep.ok, payload, text, rows, first)


def _replay_bracket(alpha, Y, cap):
    # recursive braces route, independent of the pre-Lie product used by the solver
    from .convolution_linfty import ConvElement, braces

    acc = ConvElement.zero(Y.ring)
    for p, Yp in Y.parity_parts().items():
        s = -1 if p % 2 else 1  # α is odd
        acc = acc + braces(alpha, [Yp], cap) - braces(Yp, [alpha], cap).scale(s)
    return acc


def cmd_replay(cfg: RunConfig) -> Outcome:
    from .convolution_linfty import ConvElement
    from .polyvector_hochschild import AffineContext
    from .rigidity_verifier import alpha_element

    data = _load_json(cfg.params["certificate"])
    try:
        c = data["context"]
        ctx = AffineContext(int(c["dims"]), tuple(c["t_degrees"]), degcap=int(c["degcap"]),
                            arity_cap=int(c["arity_cap"]))
        entries = list(data["entries"]) + ([data["featured"]] if "featured" in data else [])
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"not a rigidity certificate: missing {exc}") from None
    alpha = alpha_element(ctx)
    checked, bad = 0, []
    for j, entry in enumerate(entries):
        if "primitive" not in entry:
            bad.append({"entry": j, "reason": "no primitive"})
            continue
        X = ConvElement.from_json(ctx.va_ring, entry["cocycle"])
        Y = ConvElement.from_json(ctx.va_ring, entry["primitive"])
        cap = max(X.arities() | Y.arities() | {1}) + 1
        checked += 1
        if _replay_bracket(alpha, Y, cap) != X:
            bad.append({"entry": j, "reason": "∂Y differs from X"})
    payload = {"checked": checked, "failures": bad}
    return Outcome(not bad, payload, f"{checked} primitives replayed, {len(bad)} failures", None,
                   bad[0] if bad else None)


def _mc_state(cfg: RunConfig):
    from .convolution_linfty import ConvElement, ConvolutionAlgebra, identity_element
    from .rigidity_verifier import alpha_element

    ctx = cfg.context()
    ring = ctx.va_ring
    state = _load_json(cfg.params["state"])
    if not isinstance(state, dict):
        raise ArgumentError(f"{cfg.params['state']}: expected a JSON object")

    def element(key, default):
        return ConvElement.from_json(ring, state[key]) if key in state else default

    try:
        source = element("source", alpha_element(ctx))
        target = element("target", alpha_element(ctx))
        point = element("alpha", identity_element(ring))
    except (KeyError, TypeError, ValueError) as exc:
        raise ArgumentError(f"{cfg.params['state']}: {exc}") from None
    cap = int(state.get("arity_cap", cfg.arity_cap))
    return ctx, ConvolutionAlgebra(source, target, cap), point


def cmd_mc_adjust(cfg: RunConfig) -> Outcome:
    from .convolution_linfty import ConvElement, mc_adjust, one_cell_check

    ctx, L, point = _mc_state(cfg)
    data = _load_json(cfg.params["xi"])
    try:
        xi = ConvElement.from_json(ctx.va_ring, data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArgumentError(f"{cfg.params['xi']}: {exc}") from None
    if xi.is_zero():
        raise ArgumentError("ξ is zero")
    n = int(data.get("n", xi.min_arity()))
    if not L.mc_residual(point).is_zero():
        raise InvariantViolation("the starting point is not a Maurer–Cartan element")
    res = mc_adjust(L, point, xi, n, cfg.depth)
    cell = one_cell_check(L, res.path)
    dxi = L.diff(xi)
    first = (res.endpoint - point - dxi).in_filtration(n + 1)
    payload = {"context": _context_json(cfg), "n": n, "iterations": res.iterations,
               "path": res.path.to_json(), "endpoint": res.endpoint.to_json(),
               "one_cell": cell.to_json(), "first_order": first}
    text = f"{res.iterations} iterations, 1-cell {'ok' if cell.ok else 'FAILED'}, " \
           f"first-order term {'ok' if first else 'FAILED'}\nendpoint: {res.endpoint.format()}"
    return Outcome(cell.ok and first, payload, text, None, cell.to_json() if not cell.ok else None)


def cmd_cyl_audit(cfg: RunConfig) -> Outcome:
    from .cyl_audit import no_nonpositive_derivations

    rep = no_nonpositive_derivations(cfg.params["n_max"], cfg.params["k_max"])
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    text = f"{len(rep.reports)} trees, {len(rep.violations)} violations, " \
           f"enumerators {'agree' if rep.enumerators_agree else 'DISAGREE'}"
    first = rep.violations[0].tree if rep.violations else (rep.all_mixed[0] if rep.all_mixed else None)
    return Outcome(rep.ok, rep.to_json(), text, rows, first)


def cmd_linfty_relations(cfg: RunConfig) -> Outcome:
    from .convolution_linfty import ConvolutionAlgebra, exp_ad, random_invariant
    from .rigidity_verifier import alpha_element

    ctx = cfg.context()
    ring = ctx.va_ring
    rng = random.Random(cfg.seed)
    alpha = alpha_element(ctx)
    cap = cfg.arity_cap
    g = random_invariant(ring, rng, 2, degree=0)
    L = ConvolutionAlgebra(alpha, exp_ad(g, alpha, cap + 1), cap)
    samples = cfg.params.get("samples") or 10
    stats, first = [], None
    for m in (1, 2, 3):
        bad = 0
        for _ in range(samples):
            vs = []
            for _ in range(m):
                x = random_invariant(ring, rng, rng.randint(1, max(1, min(2, cap - m + 1))))
                parts = x.homogeneous_parts()
                vs.append(parts[min(parts)] if parts else x)
            r = L.relation(vs)
            if not r.is_zero():
                bad += 1
                first = first or {"m": m, "inputs": [v.to_json() for v in vs], "defect": r.to_json()}
        stats.append({"m": m, "samples": samples, "violations": bad})
    rows = [["m", "samples", "violations"]] + [[s["m"], s["samples"], s["violations"]] for s in stats]
    text = "\n".join(f"m={s['m']}: {s['violations']} violations in {s['samples']} samples" for s in stats)
    ok = all(s["violations"] == 0 for s in stats)
    return Outcome(ok, {"context": _context_json(cfg), "seed": cfg.seed, "relations": stats}, text, rows, first)


# name -> (handler, argument setup, default format)
COMMANDS: dict[str, tuple[Callable[[RunConfig], Outcome], Callable, str]] = {
    "ger-basis": (cmd_ger_basis, lambda p: p.add_argument("n", type=int), "text"),
    "braces-audit": (cmd_braces_audit, lambda p: p.add_argument("n", type=int), "json"),
    "brace-eval": (cmd_brace_eval, lambda p: (p.add_argument("tree", help="tree string or JSON file"),
                                              p.add_argument("ops", help="JSON list of operators")), "json"),
    "rigidity": (cmd_rigidity, lambda p: (p.add_argument("n", type=int),
                                          p.add_argument("--order-cap", type=int)), "json"),
    "replay": (cmd_replay, lambda p: p.add_argument("certificate"), "text"),
    "mc-adjust": (cmd_mc_adjust, lambda p: (p.add_argument("state"), p.add_argument("xi")), "json"),
    "cyl-audit": (cmd_cyl_audit, lambda p: (p.add_argument("n_max", type=int),
                                            p.add_argument("k_max", type=int)), "csv"),
    "linfty-relations": (cmd_linfty_relations, lambda p: p.add_argument("--samples", type=int), "text"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config")
    common.add_argument("--dims", type=int)
    common.add_argument("--t-degrees")
    common.add_argument("--degcap", type=int)
    common.add_argument("--arity-cap", type=int)
    common.add_argument("--neutral-cap", type=int)
    common.add_argument("--depth", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["json", "csv", "text"])
    parser = _Parser(prog="gerbrace", description="Exact checks for brace trees, Gerstenhaber operads "
                                                  "and convolution algebras.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, setup, _) in COMMANDS.items():
        setup(sub.add_parser(name, parents=[common]))
    return parser


def render(outcome: Outcome, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_strip_timing(outcome.payload), indent=2, sort_keys=True, default=str) + "\n"
    if fmt == "csv":
        if outcome.rows is None:
            raise ArgumentError("this command has no CSV form")
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(outcome.rows)
        return buf.getvalue()
    return outcome.text + "\n"


def run(argv: Sequence[str] | None = None, env: dict | None = None,
        stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = make_parser().parse_args(argv)
        cfg = build_config(args, env)
        outcome = COMMANDS[cfg.command][0](cfg)
        text = render(outcome, cfg.format)
        if cfg.out is not None:
            cfg.out.mkdir(parents=True, exist_ok=True)
            (cfg.out / f"{cfg.command}.{cfg.format}").write_text(text)
        stdout.write(text)
    except ArgumentError as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    except InvariantViolation as exc:
        stderr.write(f"invariant violated: {exc}\n")
        return 1
    if not outcome.ok:
        stderr.write("invariant violated; first counterexample:\n")
        stderr.write(json.dumps(outcome.counterexample, sort_keys=True, default=str) + "\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
