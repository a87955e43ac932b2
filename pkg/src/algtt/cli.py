"""Command line front end: scenario verification plus a few direct queries.

Exit codes: 0 when every check passes (not-applicable counts as passing),
1 when a check fails, 2 on usage or scenario errors.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema

from . import __version__
from .equiv import LAWS, build_equiv, random_nested_family, typeiso_witness
from .finset import FinSetError, encode_label
from .mlalg import (
    OutOfBoundError,
    TypeMismatchError,
    eq_structure_check,
    id_comparison,
    nat_algebra,
    sabotaged_nat_algebra,
    verify_ml_algebra,
)
from .polynomial import (
    PolySignature,
    composition_naturality,
    extension_size,
    random_signature_pairs,
)
from .presheaf import (
    CategoryError,
    IndexCategory,
    all_presheaves,
    arrow_category,
    category_from_json,
    check_subobject_classification,
    composable_pair,
    hs_omega_iso,
    hs_universe,
    omega,
    omega_algebra,
    terminal_category,
)
from .ttcheck import (
    DEFAULT_BOUND,
    Context,
    ParseError,
    ScopeError,
    elaborate,
    parse,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BUILTIN_CATEGORIES: dict[str, Callable[[], IndexCategory]] = {
    "terminal": terminal_category,
    "arrow": arrow_category,
    "composable-pair": composable_pair,
}


class ScenarioError(ValueError):
    """The scenario file is malformed or names something that cannot be built."""


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | not-applicable
    fibers_checked: int = 0
    elements_checked: int = 0
    witness: Any = None
    detail: str = ""
    parts: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "check": self.name,
            "status": self.status,
            "counters": {"fibers_checked": self.fibers_checked, "elements_checked": self.elements_checked},
            "witness": encode_label(self.witness),
            "detail": self.detail,
        }
        if self.parts:
            out["parts"] = [p.to_json() for p in self.parts]
        return out


@dataclass
class Report:
    scenario: str
    checks: list
    seed: int | None = None
    duration_s: float = 0.0

    @property
    def status(self) -> str:
        return "fail" if any(c.status == "fail" for c in self.checks) else "pass"

    @property
    def exit_code(self) -> int:
        return EXIT_FAIL if self.status == "fail" else EXIT_PASS

    def counters(self) -> dict:
        return {
            "checks": len(self.checks),
            "fibers_checked": sum(c.fibers_checked for c in self.checks),
            "elements_checked": sum(c.elements_checked for c in self.checks),
        }

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "status": self.status,
            "seed": self.seed,
            "version": __version__,
            "duration_s": round(self.duration_s, 6),
            "counters": self.counters(),
            "checks": [c.to_json() for c in self.checks],
        }


# -- scenario loading --------------------------------------------------------------


def scenario_schema() -> dict:
    return json.loads(resources.files("algtt.scenarios").joinpath("scenario.schema.json").read_text())


def bundled_scenarios() -> list[str]:
    return sorted(
        p.name
        for p in resources.files("algtt.scenarios").iterdir()
        if p.name.endswith(".json") and p.name != "scenario.schema.json"
    )


def load_scenario(ref: str | Path) -> dict:
    """Read a scenario from a path, falling back to the bundled scenarios by file name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text()
    elif str(ref) in bundled_scenarios():
        text = resources.files("algtt.scenarios").joinpath(str(ref)).read_text()
    else:
        raise ScenarioError(f"no scenario file {str(ref)!r} (bundled: {', '.join(bundled_scenarios())})")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{ref}: invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, scenario_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{ref}: schema violation at {where}: {exc.message}") from exc
    return data


def resolve_category(ref) -> IndexCategory:
    if isinstance(ref, str):
        if ref in BUILTIN_CATEGORIES:
            return BUILTIN_CATEGORIES[ref]()
        path = Path(ref)
        if not path.exists():
            raise ScenarioError(f"unknown category {ref!r}; use {', '.join(BUILTIN_CATEGORIES)} or a JSON file")
        ref = json.loads(path.read_text())
    try:
        return category_from_json(ref)
    except (CategoryError, KeyError, TypeError) as exc:
        raise ScenarioError(f"cannot build the index category: {exc}") from exc


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


# -- checks ---------------------------------------------------------------------------


def _squares_result(name: str, report) -> CheckResult:
    parts = [
        CheckResult(s.name, s.status, s.fibers_checked, s.elements_checked, s.witness, _where(s) + s.detail)
        for s in report.squares
    ]
    first_fail = next((p for p in parts if p.status == "fail"), None)
    return CheckResult(
        name,
        _status(report.ok),
        sum(p.fibers_checked for p in parts),
        sum(p.elements_checked for p in parts),
        first_fail.witness if first_fail else None,
        f"{first_fail.name} square: {first_fail.detail}" if first_fail else "",
        parts,
    )


def _where(s) -> str:
    return f"at {s.where!r}: " if s.where not in (None, "*") else ""


def _check_ml_squares(target, check, ctx) -> CheckResult:
    kind = target["kind"]
    if kind == "nat":
        bounds = {k: check[k] for k in ("max_length", "max_entry") if k in check}
        return _squares_result("ml-squares", verify_ml_algebra(ctx.algebra(), **bounds))
    if kind == "omega":
        return _squares_result("ml-squares", verify_ml_algebra(omega_algebra(ctx.category())))
    if kind == "hs":
        return _squares_result("ml-squares", verify_ml_algebra(ctx.universe()))
    raise ScenarioError(f"ml-squares does not apply to a {kind!r} target")


def _check_eq(target, check, ctx) -> CheckResult:
    s = eq_structure_check(ctx.algebra(), max_base=check.get("max_base"))
    return CheckResult("eq-square", s.status, s.fibers_checked, s.elements_checked, s.witness, s.detail)


def _check_id(target, check, ctx) -> CheckResult:
    cmp = id_comparison(ctx.algebra(), max_base=check.get("max_base"), max_entry=check.get("max_entry"))
    dom = cmp.comparison.dom
    witness = None
    if not cmp.section_law:
        witness = next(z for z in cmp.J.dom.elements if cmp.comparison(cmp.J(z)) != z)
    detail = f"comparison {'is' if cmp.bijective else 'is not'} bijective"
    return CheckResult("id-comparison", _status(cmp.ok), len(cmp.comparison.cod), len(dom), witness, detail)


def _check_equiv(target, check, ctx) -> CheckResult:
    ec = build_equiv(ctx.algebra(), check.get("max_n", 3))
    for (m, n), size in ec.fiber_sizes().items():
        expected = math.factorial(m) if m == n else 0
        if size != expected:
            return CheckResult("equiv-fibers", "fail", len(ec.pairs), len(ec.total), (m, n), f"{size} equivalences, expected {expected}")
    return CheckResult("equiv-fibers", "pass", len(ec.pairs), len(ec.total))


def _check_omega_sizes(target, check, ctx) -> CheckResult:
    C = ctx.category()
    sizes = [len(omega(C).presheaf.at[c]) for c in C.objects]
    expect = check.get("expect")
    ok = expect is None or list(expect) == sizes
    return CheckResult("omega-sizes", _status(ok), len(sizes), sum(sizes), None if ok else sizes, f"sizes {sizes}")


def _check_subobjects(target, check, ctx) -> CheckResult:
    C = ctx.category()
    om = omega(C)
    presheaves = subs = 0
    for X in all_presheaves(C, check.get("max_size", 1)):
        presheaves += 1
        res = check_subobject_classification(X, om)
        subs += res.subobjects
        if not res.bijective:
            return CheckResult("subobject-classification", "fail", presheaves, subs, X.sizes(), "Sub(X) -> Hom(X, Ω) is not bijective")
    return CheckResult("subobject-classification", "pass", presheaves, subs, detail=f"{presheaves} presheaves")


def _check_hs_iso(target, check, ctx) -> CheckResult:
    hs = ctx.universe()
    if hs.kappa != 2:
        return CheckResult("hs-omega-iso", "not-applicable", detail="the comparison with Ω needs κ = 2")
    try:
        iso = hs_omega_iso(hs)
    except FinSetError as exc:
        return CheckResult("hs-omega-iso", "fail", detail=str(exc))
    return CheckResult("hs-omega-iso", "pass", len(iso.components), sum(len(m.dom) for m in iso.components.values()))


def _check_poly(target, check, ctx) -> CheckResult:
    p, q = (PolySignature.from_json(target[k]) for k in ("p", "q"))
    res = composition_naturality(p, q, tuple(check.get("sizes", (0, 1, 2, 3))))
    return CheckResult(
        "poly-compose",
        _status(res.ok),
        res.maps_checked,
        sum(res.extension_sizes),
        res.witness,
        f"|P_(p.q)(X)| = {list(res.extension_sizes)}",
    )


def _check_tt(target, check, ctx) -> CheckResult:
    alg = nat_algebra(target.get("bound", DEFAULT_BOUND))
    checked = 0
    for item in target["items"]:
        checked += 1
        try:
            table = eval_expression(item["expr"], item.get("context", ""), alg)
        except (ParseError, ScopeError, TypeMismatchError, OutOfBoundError) as exc:
            return CheckResult("tt-eval", "fail", checked, checked, item["expr"], str(exc))
        if "expect" in item and list(table.values()) != [item["expect"]]:
            return CheckResult("tt-eval", "fail", checked, checked, item["expr"], f"got {list(table.values())}, expected {item['expect']}")
    return CheckResult("tt-eval", "pass", checked, checked)


def _check_typeiso(target, check, ctx) -> CheckResult:
    alg = ctx.algebra()
    rng = random.Random(ctx.seed)
    laws = [check["law"]] if "law" in check else list(LAWS)
    samples = check.get("samples", 10)
    elements = 0
    for k in range(samples):
        law = laws[k % len(laws)]
        data = random_nested_family(rng, law, check.get("max_fiber", 3), max_card=alg.bound - 1)
        w = typeiso_witness(law, alg, data)
        elements += len(w.lhs)
        if not w.ok:
            return CheckResult("typeiso", "fail", k + 1, elements, (law, data.A, data.B, data.C), "witness is not a bijection over the base")
    return CheckResult("typeiso", "pass", samples, elements)


CHECKS: dict[str, tuple[tuple, Callable]] = {
    "ml-squares": (("nat", "omega", "hs"), _check_ml_squares),
    "eq-square": (("nat",), _check_eq),
    "id-comparison": (("nat",), _check_id),
    "equiv-fibers": (("nat",), _check_equiv),
    "typeiso": (("nat",), _check_typeiso),
    "omega-sizes": (("omega", "category", "hs"), _check_omega_sizes),
    "subobject-classification": (("omega", "category"), _check_subobjects),
    "hs-omega-iso": (("hs",), _check_hs_iso),
    "poly-compose": (("signatures",), _check_poly),
    "tt-eval": (("expressions",), _check_tt),
}


class _Targets:
    """Lazily built, cached objects named by the scenario target."""

    def __init__(self, target: dict, seed: int | None, bound: int | None):
        self.target = target
        self.seed = seed
        self.bound = bound
        self._cache: dict = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def algebra(self):
        bound = self.bound if self.bound is not None else self.target["bound"]
        make = sabotaged_nat_algebra if self.target.get("sabotage") else nat_algebra
        return self._get("alg", lambda: make(bound))

    def category(self) -> IndexCategory:
        return self._get("cat", lambda: resolve_category(self.target["index_category"]))

    def universe(self):
        return self._get("hs", lambda: hs_universe(self.category(), self.target["kappa"]))


def run_scenario_data(data: dict, seed: int | None = None, bound: int | None = None) -> Report:
    """Run the checks of an already validated scenario in declared order."""
    start = time.perf_counter()
    target = data["target"]
    if seed is None:
        seed = data.get("seed")
    uses_rng = any(c["check"] == "typeiso" for c in data["checks"])
    if uses_rng and seed is None:
        seed = 0
    ctx = _Targets(target, seed, bound)
    results = []
    for check in data["checks"]:
        kinds, run = CHECKS[check["check"]]
        if target["kind"] not in kinds:
            raise ScenarioError(f"check {check['check']!r} does not apply to a {target['kind']!r} target")
        try:
            results.append(run(target, check, ctx))
        except OutOfBoundError as exc:
            results.append(CheckResult(check["check"], "fail", witness=exc.argument, detail=str(exc)))
    return Report(data["name"], results, seed if uses_rng else None, time.perf_counter() - start)


def run_scenario(path: str | Path, seed: int | None = None, bound: int | None = None) -> Report:
    return run_scenario_data(load_scenario(path), seed, bound)


def emit_report(report: Report, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), sort_keys=True, ensure_ascii=False)
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}; use text or json")
    lines = [f"scenario {report.scenario}: {report.status.upper()} ({report.duration_s:.3f} s)"]
    if report.seed is not None:
        lines.append(f"  seed {report.seed}")
    for c in report.checks:
        lines.append(
            f"  [{c.status}] {c.name}  fibers={c.fibers_checked} elements={c.elements_checked}"
        )
        for p in c.parts:
            lines.append(f"      [{p.status}] {p.name}  fibers={p.fibers_checked} elements={p.elements_checked}")
        if c.status == "fail":
            lines.append(f"      witness: {c.witness!r}")
            if c.detail:
                lines.append(f"      {c.detail}")
    if not report.checks:
        lines.append("  (no checks)")
    return "\n".join(lines)


# -- direct queries ----------------------------------------------------------------------


def eval_expression(text: str, context: str, alg) -> dict:
    """Map each environment of the context to the cardinal of the type."""
    ctx = Context.parse(context) if context.strip() else Context()
    ctx.check_scope()
    table = elaborate(ctx, parse(text), alg)
    return dict(zip(table.dom.elements, table.table))


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated sizes, got {text!r}")
    if any(n < 0 for n in sizes):
        raise argparse.ArgumentTypeError("sizes must be non-negative")
    return sizes


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    else:
        print(text)


def cmd_verify(args) -> int:
    reports = [run_scenario(ref, args.seed, args.bound) for ref in args.scenario]
    if args.format == "json":
        payload = [r.to_json() for r in reports]
        print(json.dumps(payload[0] if len(payload) == 1 else payload, sort_keys=True, ensure_ascii=False))
    else:
        print("\n".join(emit_report(r) for r in reports))
    return max(r.exit_code for r in reports)


def cmd_poly_compose(args) -> int:
    if args.random:
        rng = random.Random(args.seed)
        pairs = random_signature_pairs(rng, args.random, args.max_extension)
    else:
        if args.p is None or args.q is None:
            raise ScenarioError("give --p and --q, or --random N")
        pairs = [(PolySignature.from_sizes(args.p), PolySignature.from_sizes(args.q))]
    rows, ok = [], True
    for p, q in pairs:
        res = composition_naturality(p, q, tuple(args.sizes))
        ok &= res.ok
        rows.append(
            {
                "p": list(p.fiber_sizes()),
                "q": list(q.fiber_sizes()),
                "extension_sizes": list(res.extension_sizes),
                "nested_sizes": [sum(extension_size(q, n) ** k for k in p.fiber_sizes()) for n in args.sizes],
                "status": _status(res.ok),
                "maps_checked": res.maps_checked,
            }
        )
    text = "\n".join(
        f"p={r['p']} q={r['q']} |P_(p.q)(X)|={r['extension_sizes']} [{r['status']}] maps={r['maps_checked']}"
        for r in rows
    )
    _emit(args, {"seed": args.seed if args.random else None, "sizes": args.sizes, "pairs": rows}, text)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_presheaf_omega(args) -> int:
    C = resolve_category(args.category)
    om = omega(C)
    at = {str(c): [list(S) for S in om.presheaf.at[c].elements] for c in C.objects}
    payload = {"objects": [str(c) for c in C.objects], "sizes": [len(v) for v in at.values()], "sieves": at}
    text = "\n".join(f"Ω({c}) has {len(v)} sieves: " + ", ".join("{" + ", ".join(map(str, S)) + "}" for S in v) for c, v in at.items())
    code = EXIT_PASS
    if args.verify:
        report = verify_ml_algebra(omega_algebra(C))
        payload["squares"] = {s.name: s.status for s in report.squares}
        text += "\n" + "\n".join(f"{s.name} square: {s.status}" for s in report.squares)
        code = EXIT_PASS if report.ok else EXIT_FAIL
    _emit(args, payload, text)
    return code


def cmd_universe_nerve(args) -> int:
    C = resolve_category(args.category)
    hs = hs_universe(C, args.kappa)
    sizes = {str(c): [len(hs.V.at[c]), len(hs.Vdot.at[c])] for c in C.objects}
    payload = {"kappa": args.kappa, "sizes": sizes}
    text = "\n".join(f"{c}: |V| = {v}, |V.| = {d}" for c, (v, d) in sizes.items())
    if args.kappa == 2:
        iso = hs_omega_iso(hs).is_iso()
        payload["omega_iso"] = iso
        text += f"\nV_2 ≅ Ω: {iso}"
    _emit(args, payload, text)
    return EXIT_PASS


def cmd_equiv_fibers(args) -> int:
    ec = build_equiv(nat_algebra(args.bound), args.max_n)
    sizes = ec.fiber_sizes()
    n = args.max_n + 1
    payload = {"max_n": args.max_n, "sizes": [[sizes[(m, k)] for k in range(n)] for m in range(n)]}
    width = max(len(str(v)) for v in sizes.values())
    header = "m\\n " + " ".join(str(k).rjust(width) for k in range(n))
    body = [f"{m:>3} " + " ".join(str(sizes[(m, k)]).rjust(width) for k in range(n)) for m in range(n)]
    _emit(args, payload, "\n".join([header, *body]))
    return EXIT_PASS


def cmd_tt_eval(args) -> int:
    exprs = list(args.expr) or [line for line in sys.stdin.read().splitlines() if line.strip()]
    alg = nat_algebra(args.bound)
    results = []
    for text in exprs:
        table = eval_expression(text, args.context, alg)
        results.append((text, table))
    if args.format == "json":
        payload = [
            {"expr": t, "table": [{"env": list(env), "cardinal": v} for env, v in table.items()]}
            for t, table in results
        ]
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
        return EXIT_PASS
    for text, table in results:
        if list(table) == [()]:
            print(table[()])
        else:
            print(text)
            for env, v in table.items():
                print(f"  {env}: {v}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized suites (recorded in reports)")

    parser = argparse.ArgumentParser(prog="algtt", description="Finite checks for algebraic models of type theory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[common], help="run scenario files")
    verify.add_argument("scenario", nargs="+", help="scenario path or bundled name such as nat-mlalg.json")
    verify.add_argument("--bound", type=int, default=None, help="override the cardinal bound of nat targets")
    verify.set_defaults(func=cmd_verify)

    poly = sub.add_parser("poly").add_subparsers(dest="action", required=True)
    compose = poly.add_parser("compose", parents=[common], help="check P_(p.q) ≅ P_p P_q and its naturality")
    compose.add_argument("--p", type=_parse_sizes, help="fiber sizes of p, e.g. 0,1,2")
    compose.add_argument("--q", type=_parse_sizes, help="fiber sizes of q")
    compose.add_argument("--random", type=int, default=0, metavar="N", help="check N seeded random pairs instead")
    compose.add_argument("--max-extension", type=int, default=2000)
    compose.add_argument("--sizes", type=_parse_sizes, default=[0, 1, 2, 3])
    compose.set_defaults(func=cmd_poly_compose)

    presheaf = sub.add_parser("presheaf").add_subparsers(dest="action", required=True)
    om = presheaf.add_parser("omega", parents=[common], help="list the sieves of each object")
    om.add_argument("--category", default="arrow", help="terminal, arrow, composable-pair or a JSON file")
    om.add_argument("--verify", action="store_true", help="also check the Ω-algebra squares")
    om.set_defaults(func=cmd_presheaf_omega)

    universe = sub.add_parser("universe").add_subparsers(dest="action", required=True)
    nv = universe.add_parser("nerve", parents=[common], help="sizes of the finite universe presheaves")
    nv.add_argument("--category", default="arrow")
    nv.add_argument("--kappa", type=int, choices=(2, 3), default=2)
    nv.set_defaults(func=cmd_universe_nerve)

    equiv = sub.add_parser("equiv").add_subparsers(dest="action", required=True)
    fib = equiv.add_parser("fibers", parents=[common], help="number of equivalences m -> n")
    fib.add_argument("--max-n", type=int, default=4)
    fib.add_argument("--bound", type=int, default=64)
    fib.set_defaults(func=cmd_equiv_fibers)

    tt = sub.add_parser("tt").add_subparsers(dest="action", required=True)
    ev = tt.add_parser("eval", parents=[common], help="cardinality of types (arguments or stdin lines)")
    ev.add_argument("expr", nargs="*")
    ev.add_argument("--context", default="", help='e.g. "x : Fin 3, y : Fin x"')
    ev.add_argument("--bound", type=int, default=DEFAULT_BOUND)
    ev.set_defaults(func=cmd_tt_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ParseError, ScopeError, TypeMismatchError, OutOfBoundError, ValueError) as exc:
        print(f"algtt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
