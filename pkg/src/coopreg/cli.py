"""Command-line front end: ``coopreg check|synthesize|simulate|repro|verify-counterexamples``.

Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 parse
error.  ``COOPREG_SEED`` is reserved; every algorithm here is deterministic.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import appendix_checks, exo_sim, numlin
from .closed_loop import assemble, shifted_initial_state, solve_regulator, ultimate_bound
from .errors import CoopRegError, NumericalError, ParseError, ValidationError
from .graph import check_lemma1, check_lemma2, graph_matrices
from .internal_model import verify_pcopy_canonical
from .plant import Law, validate
from .scenario import Scenario, bundled_path, load
from .synthesis import (
    LoopKind,
    ObserverGains,
    ObserverKind,
    check_local_condition,
    local_loop,
    make_gains,
    synthesize_observer,
    synthesize_state_feedback,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_PARSE = 0, 2, 3, 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False)


def _verdict(ok) -> str:
    return "PASS" if ok else "FAIL"


# ------------------------------------------------------------------ check


def cmd_check(sc: Scenario) -> tuple[dict, int]:
    law = sc.law
    rep = validate(sc.agents, sc.exo, sc.A0, sc.graph, law)
    required = rep.required()
    im_ok = [verify_pcopy_canonical(im.G1, im.G2, sc.A0, sc.exo.p) for im in sc.ims]
    required["A6"] = all(im_ok)
    a2 = {"kappa": None, "ok": False, "detail": ""}
    try:
        a2["kappa"] = exo_sim.estimate_kappa(sc.signal, sc.A0, sc.sim.t_final, sc.sim.kappa_dt)
        a2["ok"] = bool(np.isfinite(a2["kappa"]))
    except NumericalError as exc:
        a2["detail"] = str(exc)
    required["A2"] = a2["ok"]
    graph = {}
    if rep.A3:
        gm = graph_matrices(sc.graph, sc.exo.p)
        graph = {"rho_FA": gm.rho_FA, "lemma1": check_lemma1(gm), "lemma2": check_lemma2(gm)}
    diags = list(rep.diagnostics)
    diags += [f"agent {i}: A6: internal model is not a canonical p-copy model of A0"
              for i, ok in enumerate(im_ok, start=1) if not ok]
    if not a2["ok"]:
        diags.append(f"A2: {a2['detail'] or 'mismatch bound not finite'}")
    order = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8"]
    required = {k: bool(required[k]) for k in order if k in required}
    passed = all(required.values())
    report = {
        "command": "check",
        "scenario": sc.name,
        "law": law.value,
        "assumptions": required,
        "kappa_estimate": a2["kappa"],
        "graph": graph,
        "per_agent": rep.to_dict()["agents"],
        "diagnostics": diags,
        "passed": passed,
    }
    return report, EXIT_OK if passed else EXIT_VALIDATION


def _print_check(report: dict) -> None:
    print(f"scenario {report['scenario']} (law {report['law']})")
    for k, v in report["assumptions"].items():
        print(f"  {k}: {_verdict(v)}")
    if report["graph"]:
        g = report["graph"]
        print(f"  rho(FA) = {g['rho_FA']:.6g}; I - FA eigenvalues in open RHP: {g['lemma1']}; rho(FA) < 1: {g['lemma2']}")
    if report["kappa_estimate"] is not None:
        print(f"  empirical mismatch bound kappa = {report['kappa_estimate']:.6g}")
    for d in report["diagnostics"]:
        print(f"  - {d}")
    print(_verdict(report["passed"]))


# ------------------------------------------------------------- synthesis


def _loop_kind(law: Law) -> LoopKind:
    return LoopKind.OUTPUT_FEEDBACK if law is Law.OUTPUT_FEEDBACK else LoopKind.STATE_FEEDBACK


def _needs_observer(law: Law, obs: ObserverGains | None) -> ObserverKind | None:
    if law is Law.OUTPUT_FEEDBACK_LOCAL and (obs is None or obs.H is None):
        return ObserverKind.LOCAL_MEASUREMENT
    if law is Law.OUTPUT_FEEDBACK and (obs is None or obs.L is None):
        return ObserverKind.DISTRIBUTED
    return None


def fill_gains(sc: Scenario) -> list[dict]:
    """Synthesise whatever gains the scenario's law needs and lacks, in place.

    Each agent is handled on its own; a failure on one agent is recorded and
    does not stop the others.
    """
    results = []
    for i, (ag, im) in enumerate(zip(sc.agents, sc.ims)):
        res = {"agent": i + 1, "synthesized": [], "error": None}
        try:
            if sc.gains[i] is None:
                sc.gains[i] = synthesize_state_feedback(ag, im)
                res["synthesized"].append("K1/K2")
            kind = _needs_observer(sc.law, sc.observers[i])
            if kind is not None:
                new = synthesize_observer(ag, kind)
                old = sc.observers[i] or ObserverGains()
                sc.observers[i] = ObserverGains(H=new.H if new.H is not None else old.H,
                                                L=new.L if new.L is not None else old.L)
                res["synthesized"].append("H" if kind is ObserverKind.LOCAL_MEASUREMENT else "L")
        except CoopRegError as exc:
            res["error"] = f"{type(exc).__name__}: {exc}"
        results.append(res)
    return results


def agent_certificates(sc: Scenario, rho_FA: float) -> list[dict]:
    """Local Hurwitz verdicts and small-gain margins for every agent with gains."""
    out = []
    which = _loop_kind(sc.law)
    for i, (ag, im, g, o) in enumerate(zip(sc.agents, sc.ims, sc.gains, sc.observers), start=1):
        row = {"agent": i}
        if g is None:
            row["error"] = "no state-feedback gains"
            out.append(row)
            continue
        gains = make_gains(ag, im, g.K1, g.K2)
        row["A_f_hurwitz"] = gains.verified
        try:
            loop = local_loop(ag, im, gains, o if which is LoopKind.OUTPUT_FEEDBACK else None)
            A, _, _ = loop.matrices(which)
            row["local_hurwitz"] = numlin.is_hurwitz(A)
            row["local_max_real_eig"] = numlin.max_real_eig(A)
            if sc.law is Law.OUTPUT_FEEDBACK and loop.A_L is not None:
                row["A_L_hurwitz"] = numlin.is_hurwitz(loop.A_L)
                row["spectral_split"] = numlin.spectra_match(
                    numlin.eigvals(loop.A_F),
                    np.concatenate([numlin.eigvals(loop.A_f), numlin.eigvals(loop.A_L)]),
                )
            if sc.law is Law.OUTPUT_FEEDBACK_LOCAL and o is not None and o.H is not None:
                row["A_H_hurwitz"] = numlin.is_hurwitz(ag.A - o.H @ ag.C_m)
            lc = check_local_condition(loop, rho_FA, which)
            row.update(hinf=lc.hinf, product=lc.product, margin=lc.margin,
                       local_condition=lc.passed, graph_free=lc.graph_free_passed)
        except CoopRegError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        out.append(row)
    return out


def cmd_synthesize(sc: Scenario, out_path) -> tuple[dict, int]:
    results = fill_gains(sc)
    gm = graph_matrices(sc.graph, sc.exo.p)
    certs = agent_certificates(sc, gm.rho_FA)
    out_path = Path(out_path)
    sc.save(out_path)
    failed = [r for r in results if r["error"]]
    report = {
        "command": "synthesize",
        "scenario": sc.name,
        "law": sc.law.value,
        "rho_FA": gm.rho_FA,
        "synthesis": results,
        "agents": certs,
        "output": out_path,
        "passed": not failed,
    }
    return report, EXIT_OK if not failed else EXIT_NUMERICAL


def _print_synthesize(report: dict) -> None:
    print(f"scenario {report['scenario']} (law {report['law']}), rho(FA) = {report['rho_FA']:.6g}")
    for r, c in zip(report["synthesis"], report["agents"]):
        what = ", ".join(r["synthesized"]) or "none (supplied)"
        line = f"  agent {r['agent']}: synthesized {what}"
        if r["error"]:
            line += f"; FAILED {r['error']}"
        elif "margin" in c:
            line += f"; local loop Hurwitz {c['local_hurwitz']}; ||g||inf = {c['hinf']:.6g}; margin {c['margin']:.4g}"
        print(line)
    weak = [c["agent"] for c in report["agents"] if "margin" in c and not c["local_condition"]]
    if weak:
        print(f"  warning: local small-gain condition fails for agents {weak}; global stability is not certified")
    print(f"wrote {report['output']}")
    print(_verdict(report["passed"]))


# -------------------------------------------------------------- simulate


def cmd_simulate(sc: Scenario, out_dir, t_final=None, dt=None) -> tuple[dict, int]:
    t_final = float(t_final if t_final is not None else sc.sim.t_final)
    dt = float(dt if dt is not None else sc.sim.dt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    synth = fill_gains(sc)
    errs = [r["error"] for r in synth if r["error"]]
    if errs:
        raise NumericalError("gain synthesis failed: " + "; ".join(errs))
    assumptions = validate(sc.agents, sc.exo, sc.A0, sc.graph, sc.law)
    gm = graph_matrices(sc.graph, sc.exo.p)
    certs = agent_certificates(sc, gm.rho_FA)
    cl = assemble(sc.law, sc.agents, sc.ims, sc.gains, sc.observers, gm, sc.exo, sc.A0)
    sol = solve_regulator(cl)
    kappa = sc.sim.kappa
    kappa_src = "scenario"
    if kappa is None:
        kappa = exo_sim.estimate_kappa(sc.signal, sc.A0, max(t_final, 1e-9), min(sc.sim.kappa_dt, t_final))
        kappa_src = "estimated"
    ub = ultimate_bound(cl, sol, kappa, sc.sim.epsilon)
    x0 = sc.initial_state()
    xbar0 = shifted_initial_state(cl, sol, x0, sc.signal.omega0)

    stride = max(1, int(round(sc.sim.record_dt / dt)))
    trace = exo_sim.simulate(cl, sc.signal, x0, t_final, dt, record_every=stride)
    T_obs, bound_ok = exo_sim.check_ultimate_bound(trace, ub.b)
    m = trace.max_error()
    # the bound is only guaranteed once the transient term has decayed; a
    # shorter horizon cannot refute it
    settle = ub.settling_time(float(np.linalg.norm(xbar0)))
    bound_consistent = bound_ok or t_final < settle

    files = [trace.to_csv(out_dir / "trace.csv")]
    for i in range(1, cl.n_agents + 1):
        files.append(trace.agent_plot_csv(out_dir / f"agent_{i}.csv", i))
    report = {
        "command": "simulate",
        "scenario": sc.name,
        "law": sc.law.value,
        "graph_note": sc.graph_note,
        "t_final": t_final,
        "dt": dt,
        "record_every": stride,
        "assumptions": assumptions.required(),
        "rho_FA": gm.rho_FA,
        "agents": certs,
        "global": {"hurwitz": numlin.is_hurwitz(cl.A), "max_real_eig": numlin.max_real_eig(cl.A),
                   "n_state": cl.n_state},
        "regulator": {"residual_sylvester": sol.residual_sylvester,
                      "residual_regulation": sol.residual_regulation,
                      "tolerance": sol.tolerance, "ok": sol.ok},
        "bound": dict(ub.to_dict(), kappa_source=kappa_src, settling_time=settle),
        "trace": {"samples": int(trace.times.size),
                  "max_error_overall": float(m.max()),
                  "max_error_final": float(m[-1]),
                  "per_agent_final": trace.error_norms()[-1].tolist(),
                  "T_observed": T_obs,
                  "within_bound": bound_ok,
                  "horizon_covers_settling_time": t_final >= settle},
        "files": [f.name for f in files] + ["summary.json"],
    }
    ok = bool(report["global"]["hurwitz"] and sol.ok and bound_consistent)
    report["passed"] = ok
    (out_dir / "summary.json").write_text(_dump(report) + "\n")
    return report, EXIT_OK if ok else EXIT_NUMERICAL


def _print_simulate(report: dict, out_dir) -> None:
    print(f"scenario {report['scenario']} (law {report['law']}), t_final={report['t_final']:g}, dt={report['dt']:g}")
    print(f"  global matrix Hurwitz: {report['global']['hurwitz']} (max Re = {report['global']['max_real_eig']:.6g})")
    r = report["regulator"]
    print(f"  regulator residuals: {r['residual_sylvester']:.3g}, {r['residual_regulation']:.3g} (tol {r['tolerance']:.3g})")
    for a in report["agents"]:
        if "margin" in a:
            print(f"  agent {a['agent']}: ||g||inf = {a['hinf']:.6g}, margin {a['margin']:.4g}")
    b = report["bound"]
    print(f"  ultimate bound b = {b['b']:.6g} (kappa = {b['kappa']:.6g}, {b['kappa_source']}; c = {b['c']:.4g}, alpha = {b['alpha']:.4g})")
    t = report["trace"]
    print(f"  max error overall {t['max_error_overall']:.6g}, at t_final {t['max_error_final']:.6g}, T_observed {t['T_observed']}")
    if not t["within_bound"] and not t["horizon_covers_settling_time"]:
        print(f"  warning: horizon ends before the bound's settling time {b['settling_time']:.4g}; bound not yet reached")
    print(f"  wrote {len(report['files'])} files to {out_dir}")
    print(_verdict(report["passed"]))


# ------------------------------------------------------- counterexamples


def cmd_verify_counterexamples() -> tuple[dict, int]:
    reports = []
    for fn in (appendix_checks.appendix_a_first, appendix_checks.appendix_a_second, appendix_checks.appendix_b):
        try:
            reports.append(fn().to_dict())
        except CoopRegError as exc:
            reports.append({"name": fn.__name__, "pass": False, "claims": [], "notes": [],
                            "error": f"{type(exc).__name__}: {exc}"})
    ok = all(r["pass"] for r in reports)
    return {"command": "verify-counterexamples", "reports": reports, "passed": ok}, EXIT_OK if ok else EXIT_NUMERICAL


def _print_counterexamples(report: dict) -> None:
    for r in report["reports"]:
        print(f"{_verdict(r['pass'])} {r['name']}")
        for c in r["claims"]:
            mark = "ok " if c["ok"] else "BAD"
            print(f"    [{mark}] {c['description']}: expected {c['expected']}, computed {c['computed']}")
        for n in r.get("notes", []):
            print(f"    note: {n}")
        if r.get("error"):
            print(f"    error: {r['error']}")


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coopreg",
        description="Cooperative output regulation: checks, synthesis and simulation.",
        epilog="Exit codes: 0 ok, 2 validation failure, 3 numerical failure, 4 parse error.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, law=True):
        if law:
            sp.add_argument("--law", choices=[l.value for l in Law], help="override the scenario's control law")
        sp.add_argument("--json", action="store_true", help="print a machine-readable report")

    sp = sub.add_parser("check", help="check the standing assumptions for a scenario")
    sp.add_argument("scenario")
    common(sp)

    sp = sub.add_parser("synthesize", help="fill in missing gains and write a scenario copy")
    sp.add_argument("scenario")
    sp.add_argument("--out", help="output scenario path (default: <name>_synthesized.yaml)")
    common(sp)

    for name, helptext in (("simulate", "simulate a scenario and export traces"),
                           ("repro", "reproduce a bundled example")):
        sp = sub.add_parser(name, help=helptext)
        if name == "simulate":
            sp.add_argument("scenario")
        else:
            sp.add_argument("example", choices=["example1", "example2"])
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--t-final", type=float, dest="t_final")
        sp.add_argument("--dt", type=float)
        common(sp)

    sp = sub.add_parser("verify-counterexamples", help="run the three counterexample reports")
    common(sp, law=False)
    return p


def _load(path, law) -> Scenario:
    sc = load(path)
    return sc.with_law(law) if law else sc


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            report, code = cmd_check(_load(args.scenario, args.law))
            printer = lambda: _print_check(report)
        elif args.command == "synthesize":
            sc = _load(args.scenario, args.law)
            out = args.out or f"{sc.name}_synthesized.yaml"
            report, code = cmd_synthesize(sc, out)
            printer = lambda: _print_synthesize(report)
        elif args.command in ("simulate", "repro"):
            path = args.scenario if args.command == "simulate" else bundled_path(args.example)
            sc = _load(path, args.law)
            out = args.out or (f"repro_{sc.name}" if args.command == "repro" else f"{sc.name}_out")
            report, code = cmd_simulate(sc, out, args.t_final, args.dt)
            printer = lambda: _print_simulate(report, out)
        else:
            report, code = cmd_verify_counterexamples()
            printer = lambda: _print_counterexamples(report)
    except ParseError as exc:
        return _fail(args, exc, EXIT_PARSE)
    except ValidationError as exc:
        return _fail(args, exc, EXIT_VALIDATION)
    except NumericalError as exc:
        return _fail(args, exc, EXIT_NUMERICAL)
    if args.json:
        print(_dump(report))
    else:
        printer()
    return code


def _fail(args, exc, code) -> int:
    if getattr(args, "json", False):
        print(_dump({"command": args.command, "error": type(exc).__name__, "message": str(exc), "passed": False}))
    else:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
