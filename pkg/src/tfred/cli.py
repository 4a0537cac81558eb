"""Command-line front end: consistency checks, fast-set search, reductions, numerics.

Commands
  check      consistency verdicts for a partition (exit 2 on failure)
  ltc        minimal admissible fast sets
  conditions parameter conditions for a pre-assigned fast set
  reduce     symbolic reduction with certificate (exit 3 when refused)
  converge   eps-ladder convergence study (exit 4 on numeric failure)
  demo-linex initial-value inconsistency demonstration
  list       available builtin models

Models come from --builtin NAME or --model FILE (JSON).  All sampling is
seeded (--seed) for reproducible reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from fractions import Fraction

from .builtin_models import BUILTINS, ModelSpec, load_builtin
from .ltc import minimal_ltc_sets, preassigned_conditions
from .matrices import ConsistencyError
from .modelfile import load_model
from .rational import RationalFunction, SymbolicError
from .reduction import (
    ReductionError,
    StandardCaseError,
    default_sample,
    eigen_certificate,
    eliminate_on_manifold,
    fast_linear_integrals,
    integral_level,
    nonstandard_decomposition,
    reduce_with,
    reduced_initial_value,
    scaled_initial_symbolic,
    standard_decomposition,
    standard_reduce,
    transform_first_integral,
)
from .sim import (
    IntegrationError,
    convergence_study,
    default_ladder,
    iv_inconsistency_demo,
)
from .systems import (
    FULL_LTC,
    Partition,
    apply_scaling,
    check_ltc,
    linear_first_integrals,
)

EXIT_OK = 0
EXIT_INCONSISTENT = 2
EXIT_REFUSED = 3
EXIT_NUMERIC = 4


def load_spec(args) -> ModelSpec:
    if args.builtin:
        return load_builtin(args.builtin)
    if args.model:
        return load_model(args.model)
    raise SystemExit("one of --builtin or --model is required")


def pick_fast(spec: ModelSpec, args) -> list[str]:
    if getattr(args, "fast", None) is not None:
        names = [n.strip() for n in args.fast.split(",") if n.strip()]
        if not names:
            raise SystemExit("--fast needs at least one state name")
        return names
    if spec.fast:
        return list(spec.fast)
    raise SystemExit("no fast set given (--fast) and the model has no default")


def parse_assignments(text: str) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    if not text:
        return out
    for piece in text.split(","):
        if not piece.strip():
            continue
        name, _, val = piece.partition("=")
        out[name.strip()] = Fraction(val.strip())
    return out


def parse_ladder(text: str) -> list[float]:
    if ":" in text:
        start_s, stop_s, law = (text.split(":") + ["half"])[:3]
        start, stop = float(start_s), float(stop_s)
        factor = 2.0 if law in ("half", "") else 10.0 if law in ("dec", "decade") else float(law)
        return default_ladder(start, stop, factor)
    return [float(v) for v in text.split(",") if v.strip()]


def emit(args, payload: dict, text: str):
    if args.format == "json":
        out = json.dumps(payload, indent=2, default=str)
    else:
        out = text
    print(out)
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
        base = os.path.join(args.out, payload.get("command", "report"))
        with open(base + ".json", "w") as fh:
            json.dump(payload, fh, indent=2, default=str)
        with open(base + ".txt", "w") as fh:
            fh.write(text + "\n")


# -- commands -----------------------------------------------------------------


def cmd_check(args) -> int:
    spec = load_spec(args)
    sys = spec.system
    fast = pick_fast(spec, args)
    part = Partition.from_fast(sys, fast)
    verdict = check_ltc(sys, part)
    scaled = apply_scaling(sys, part)
    iv_ok = scaled.iv_consistent
    payload = {
        "command": "check",
        "model": spec.name,
        "fast": fast,
        "consistency": verdict.status,
        "witness": str(verdict) if verdict.witness else None,
        "laurent_flag": scaled.laurent_flag,
        "initial_value_consistent": iv_ok,
    }
    lines = [
        f"model: {spec.name}",
        f"fast set: {{{', '.join(fast)}}}",
        f"consistency: {verdict}",
        f"scaled lowest eps-power: {scaled.laurent_flag}",
        f"initial values consistent: {'yes' if iv_ok else 'no'}",
    ]
    emit(args, payload, "\n".join(lines))
    return EXIT_OK if verdict.status == FULL_LTC and iv_ok else EXIT_INCONSISTENT


def cmd_ltc(args) -> int:
    spec = load_spec(args)
    sys = spec.system
    report = minimal_ltc_sets(sys.grade(0))
    payload = {"command": "ltc", "model": spec.name}
    payload.update(report.to_json(sys.states))
    lines = [f"model: {spec.name}"]
    lines.append(
        "candidate slow variables: {" + ", ".join(report.candidate_slow) + "}"
    )
    for group in report.minimal_sets:
        lines.append("minimal fast set: {" + ", ".join(group) + "}")
    if not report.minimal_sets:
        lines.append("no admissible fast sets")
    if not report.complete:
        lines.append(f"warning: search truncated after {report.checked_count} subset tests")
    emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_conditions(args) -> int:
    spec = load_spec(args)
    sys = spec.system
    fast = pick_fast(spec, args)
    out = preassigned_conditions(sys.grade(0), fast, scope=args.scope)
    payload = {
        "command": "conditions",
        "model": spec.name,
        "fast": fast,
        "scope": args.scope,
        "conditions": [p.render() for p in out.conditions],
        "solved": {k: str(v) for k, v in out.solved.items()} if out.solved is not None else None,
        "feasible": out.feasible,
    }
    lines = [f"model: {spec.name}", f"pre-assigned fast set: {{{', '.join(fast)}}}"]
    if not out.conditions:
        lines.append("no parameter conditions needed")
    for p in out.conditions:
        lines.append(f"condition: {p.render()} = 0")
    if out.solved:
        lines.append(
            "solved: " + ", ".join(f"{k} = {v}" for k, v in sorted(out.solved.items()))
        )
    elif out.solved is not None and out.conditions == ():
        pass
    elif out.solved is None and out.conditions:
        lines.append("no explicit solution attempted (conditions left symbolic)")
    if not out.feasible:
        lines.append("infeasible: a nonzero constant must vanish")
    emit(args, payload, "\n".join(lines))
    return EXIT_OK if out.feasible else EXIT_INCONSISTENT


def _render_rows(names, rows) -> list[str]:
    return [f"{n}' = {r.render()}" for n, r in zip(names, rows)]


def cmd_reduce(args) -> int:
    spec = load_spec(args)
    sys = spec.system
    fast = pick_fast(spec, args)
    part = Partition.from_fast(sys, fast)
    verdict = check_ltc(sys, part)
    if verdict.status != FULL_LTC:
        print(f"consistency check failed: {verdict}", file=_sys.stderr)
        return EXIT_INCONSISTENT

    mode = args.mode
    payload: dict = {"command": "reduce", "model": spec.name, "fast": fast, "seed": args.seed}
    lines = [f"model: {spec.name}", f"fast set: {{{', '.join(fast)}}}"]
    sample = default_sample(sys.ctx, seed=args.seed)

    scaled = apply_scaling(sys, part)
    try:
        red = None
        dec = None
        used_mode = None
        if mode in ("auto", "standard"):
            try:
                red = standard_reduce(sys, part)
                dec = standard_decomposition(sys, part)
                used_mode = "standard"
            except StandardCaseError:
                if mode == "standard":
                    raise
        if red is None:
            ssample = default_sample(scaled.system.ctx, seed=args.seed)
            dec = nonstandard_decomposition(scaled, ssample, seed=args.seed)
            red = reduce_with(dec, scaled.system.grade(1))
            red.initial_values = dict(scaled.system.initial_values)
            used_mode = "nonstandard"
    except (ReductionError, ConsistencyError) as exc:
        print(f"reduction refused: {exc}", file=_sys.stderr)
        return EXIT_REFUSED

    payload["mode"] = used_mode
    lines.append(f"mode: {used_mode}")
    payload["mu"] = [m.render() for m in dec.mu]
    payload["P"] = [[v.render() for v in row] for row in dec.P.entries]
    if len(sys.states) <= 6:
        payload["Q"] = [[v.render() for v in row] for row in dec.projection().entries]
    lines.append("factor mu: " + "; ".join(m.render() for m in dec.mu))
    payload["manifold"] = [m.render() for m in red.manifold.equations]
    payload["manifold_dimension"] = red.manifold.dimension
    payload["reduced"] = _render_rows(red.states, red.field)
    lines.append(f"critical manifold: dimension {red.manifold.dimension}")
    for eq in red.manifold.equations:
        lines.append(f"  {eq.render()} = 0")
    lines.append("reduced system (slow time):")
    for row in _render_rows(red.states, red.field):
        lines.append("  " + row)

    # transported linear first integrals, conservation-level relations
    extra_relations = []
    if used_mode == "nonstandard":
        transported = []
        for w in linear_first_integrals(sys):
            phi = sys.ctx.zero()
            for wi, name in zip(w, sys.states):
                if wi:
                    phi = phi + sys.ctx.sym(name) * wi
            try:
                ti = transform_first_integral(RationalFunction.of(phi), sys, scaled)
            except ReductionError:
                continue
            ti.level = integral_level(ti, scaled)
            transported.append(ti)
            # only level sets that constrain the scaled fast variables help
            # the manifold elimination; slow-variable laws stay informational
            if not set(ti.rf.num.symbols_used()).isdisjoint(scaled.fast_star):
                extra_relations.append(ti.rf - ti.level)
        payload["transported_integrals"] = [
            {"order": t.order, "integral": t.rf.render(), "level": t.level.render()}
            for t in transported
        ]
        for t in transported:
            lines.append(
                f"transported integral (order {t.order}): {t.rf.render()} = {t.level.render()}"
            )
        try:
            elim = eliminate_on_manifold(red, [], list(scaled.fast_star))
            payload["eliminated"] = {
                "solved": [(n, e.render()) for n, e in elim.solved],
                "rows": _render_rows(elim.states, elim.field),
            }
            lines.append("eliminated form (on the manifold):")
            for n, e in elim.solved:
                lines.append(f"  {n} = {e.render()}")
            for row in _render_rows(elim.states, elim.field):
                lines.append("  " + row)
            leftover = [n for n in scaled.fast_star if n in elim.states]
            if extra_relations and leftover:
                elim2 = eliminate_on_manifold(red, extra_relations, list(scaled.fast_star))
                if len(elim2.states) < len(elim.states):
                    payload["eliminated_conserved"] = {
                        "solved": [(n, e.render()) for n, e in elim2.solved],
                        "rows": _render_rows(elim2.states, elim2.field),
                    }
                    lines.append("eliminated form (with conservation laws):")
                    for n, e in elim2.solved:
                        lines.append(f"  {n} = {e.render()}")
                    for row in _render_rows(elim2.states, elim2.field):
                        lines.append("  " + row)
        except ReductionError as exc:
            payload["eliminated"] = None
            lines.append(f"(no eliminated form: {exc})")
        # reduced initial value from the fast-flow first integrals
        try:
            integrals = fast_linear_integrals(scaled.system)
            if len(integrals) + dec.r == len(scaled.system.states):
                z0 = scaled_initial_symbolic(scaled)
                sol = reduced_initial_value(
                    integrals, list(dec.mu), z0, list(scaled.system.states)
                )
                payload["reduced_initial_value"] = {
                    n: sol[n].render() for n in scaled.system.states
                }
                lines.append("reduced initial value:")
                for n in scaled.system.states:
                    lines.append(f"  {n}(0) = {sol[n].render()}")
        except ReductionError as exc:
            payload["reduced_initial_value"] = None
            lines.append(f"(no reduced initial value: {exc})")
    else:
        payload["qss"] = {n: e.render() for n, e in red.eliminated.solved} if red.eliminated else None
        if red.eliminated:
            lines.append("fast-variable expressions (first order):")
            for n, e in red.eliminated.solved:
                lines.append(f"  {n}_scaled = {e.render()}")

    fast_unknowns = list(scaled.fast_star) if used_mode == "nonstandard" else list(part.fast)
    cert = eigen_certificate(dec, n_samples=args.samples, seed=args.seed, solve_for=fast_unknowns)
    payload["certificate"] = cert.to_json()
    lines.append(
        f"eigenvalue certificate: {cert.verdict} "
        f"(margin {cert.nu_margin:.6g}, {len(cert.samples)} samples, {cert.method})"
    )
    emit(args, payload, "\n".join(lines))
    if cert.verdict != "pass":
        return EXIT_REFUSED
    return EXIT_OK


def cmd_converge(args) -> int:
    spec = load_spec(args)
    sys = spec.system
    fast = pick_fast(spec, args)
    part = Partition.from_fast(sys, fast)
    params = {p.name: Fraction(1) for p in sys.ctx.params}
    params.update(parse_assignments(args.set or ""))
    ladder = parse_ladder(args.ladder) if args.ladder else default_ladder()
    try:
        scaled = apply_scaling(sys, part)
        try:
            red = standard_reduce(sys, part)
            red_names = list(red.states)
            z0red = {}
            for n in red_names:
                iv = sys.initial_values[n]
                base = params[iv.base] if isinstance(iv.base, str) else Fraction(iv.base)
                z0red[n] = float(base) * (0.0 if iv.order > 0 else 1.0)
            rows = red.field
        except StandardCaseError:
            ssample = default_sample(scaled.system.ctx, seed=args.seed)
            dec = nonstandard_decomposition(scaled, ssample, seed=args.seed)
            red = reduce_with(dec, scaled.system.grade(1))
            red_names = list(scaled.system.states)
            integrals = fast_linear_integrals(scaled.system)
            z0 = scaled_initial_symbolic(scaled)
            sol = reduced_initial_value(integrals, list(dec.mu), z0, red_names)
            envp = {k: Fraction(v) for k, v in params.items()}
            envp["eps"] = Fraction(0)
            z0red = {n: float(sol[n].eval(envp)) for n in red_names}
            rows = red.field
        report = convergence_study(
            scaled.system,
            rows,
            red_names,
            z0red,
            params,
            ladder=ladder,
            t1=args.t1,
            t2=args.t2,
        )
    except (ReductionError, ConsistencyError) as exc:
        print(f"reduction failed: {exc}", file=_sys.stderr)
        return EXIT_REFUSED
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    payload = {"command": "converge", "model": spec.name, "fast": fast}
    payload.update(report.to_json())
    lines = [f"model: {spec.name}", f"window: [{args.t1}, {args.t2}]"]
    for eps, err in zip(report.ladder, report.errors):
        lines.append(f"eps = {eps:<10.3g} sup error = {err:.6e}")
    lines.append(f"fitted order: {report.fitted_order:.3f}")
    lines.append(f"verdict: {report.verdict}")
    emit(args, payload, "\n".join(lines))
    if report.failures:
        return EXIT_NUMERIC
    return EXIT_OK if report.verdict == "converges" else EXIT_NUMERIC


def cmd_demo_linex(args) -> int:
    ladder = parse_ladder(args.ladder) if args.ladder else default_ladder(1e-1, 1e-3)
    try:
        report = iv_inconsistency_demo(
            a=args.a,
            b=args.b,
            c=args.c,
            x0=args.x0,
            y0=args.y0,
            ladder=ladder,
            tau_eval=args.tau,
            consistent=args.consistent,
        )
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    payload = {"command": "demo-linex"}
    payload.update(report.to_json())
    lines = [
        f"variant: {'consistent (y0 scales with eps)' if args.consistent else 'inconsistent (fixed y0)'}"
    ]
    for eps, d in zip(report.ladder, report.discrepancies):
        lines.append(f"eps = {eps:<10.3g} x - x_red = {d: .8f}")
    lines.append(f"extrapolated limit: {report.extrapolated:.8f}")
    lines.append(f"closed-form limit:  {report.closed_form:.8f}")
    lines.append(f"verdict: {report.verdict}")
    emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_list(args) -> int:
    lines = []
    for name in sorted(BUILTINS):
        spec = BUILTINS[name]()
        lines.append(f"{name:24s} {spec.description}")
    print("\n".join(lines))
    return EXIT_OK


def add_model_args(p):
    p.add_argument("--builtin", help="builtin model name (see 'list')")
    p.add_argument("--model", help="JSON model file")
    p.add_argument("--fast", help="comma-separated fast variables")
    p.add_argument("--seed", type=int, default=0, help="seed for all sampling")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="directory for report files")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tfred",
        description="degenerate scalings and singular-perturbation reductions of polynomial ODE models",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="consistency verdicts for a partition")
    add_model_args(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("ltc", help="minimal admissible fast sets")
    add_model_args(p)
    p.set_defaults(fn=cmd_ltc)

    p = sub.add_parser("conditions", help="parameter conditions for a pre-assigned fast set")
    add_model_args(p)
    p.add_argument("--scope", choices=("local", "full"), default="local")
    p.set_defaults(fn=cmd_conditions)

    p = sub.add_parser("reduce", help="symbolic reduction with certificate")
    add_model_args(p)
    p.add_argument("--mode", choices=("auto", "standard", "nonstandard"), default="auto")
    p.add_argument("--samples", type=int, default=25, help="certificate sample count")
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("converge", help="eps-ladder convergence study")
    add_model_args(p)
    p.add_argument("--ladder", help="comma list or start:stop:half")
    p.add_argument("--t1", type=float, default=0.1)
    p.add_argument("--t2", type=float, default=2.0)
    p.add_argument("--set", help="parameter values k1=1,km1=2,...")
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("demo-linex", help="initial-value inconsistency demonstration")
    p.add_argument("--a", type=float, default=-1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--c", type=float, default=-1.0)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--ladder", help="comma list or start:stop:half")
    p.add_argument("--consistent", action="store_true", help="start y at eps*y0")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="directory for report files")
    p.set_defaults(fn=cmd_demo_linex)

    p = sub.add_parser("list", help="available builtin models")
    p.set_defaults(fn=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SymbolicError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    raise SystemExit(main())
