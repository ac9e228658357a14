"""Command line front end: analyze, threshold, optimize, interleave, simulate."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .codec import TurboCode
from .density import DegreeProfile, TurboEnsemble, threshold
from .erasure import PuncturePattern, analyze, is_catastrophic, mask_states, punctured_extrinsic_probability
from .optimizer import OptimizerConfig, optimize
from .peg import (
    Interleaver,
    compute_girth,
    girth_lower_bound,
    girth_upper_bound,
    graph_to_interleaver,
    peg_build,
    random_interleaver,
)
from .sim import StopRule, fer_crossing, results_csv, results_json, run_fer
from .trellis import RscSpec


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        print(text.rstrip("\n"))


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ensemble(args, analysis) -> TurboEnsemble:
    """Ensemble from --profile plus either --pattern or --rate (neither: unpunctured)."""
    spec = RscSpec.parse(args.code)
    profile = DegreeProfile.parse(args.profile, normalize=args.normalize)
    pattern = PuncturePattern.parse(args.pattern) if args.pattern else None
    if pattern is not None and args.rate is not None:
        raise ValueError("give either --pattern or --rate, not both")
    return TurboEnsemble.design(spec, profile, getattr(args, "K", 1) or 1, rate=args.rate,
                                pattern=pattern, analysis=analysis)


def cmd_analyze(args) -> None:
    a = analyze(args.code)
    pattern = PuncturePattern.parse(args.pattern) if args.pattern else PuncturePattern.unpunctured()
    grid = np.linspace(0.0, 1.0, args.grid)
    rows = []
    for p in grid:
        for q in grid:
            rows.append((float(p), float(q), str(pattern),
                         float(punctured_extrinsic_probability(a, p, q, pattern))))
    alph = {d: [mask_states(m) for m in al.members] for d, al in (("forward", a.forward), ("backward", a.backward))}
    n = len(a.forward)
    if args.format == "json":
        doc = {
            "code": str(a.spec),
            "alphabet": alph,
            "M_F": [[a.mf.entry_str(i, j) for j in range(n)] for i in range(n)],
            "M_B": [[a.mb.entry_str(i, j) for j in range(n)] for i in range(n)],
            "T_A": a.indicator.A.astype(int).tolist(),
            "T_B": a.indicator.B.astype(int).tolist(),
            "catastrophic": bool(is_catastrophic(a, pattern)),
            "grid": [dict(zip(("p", "q", "pattern", "P_ext"), r)) for r in rows],
        }
        _emit(json.dumps(doc, indent=2), args.out)
        return
    lines = [f"# code {a.spec}"]
    for d, members in alph.items():
        lines.append(f"# {d} alphabet: " + " ".join("{" + ",".join(map(str, m)) + "}" for m in members))
    for name, m in (("M_F", a.mf), ("M_B", a.mb)):
        lines.append(f"# {name}")
        lines += ["#   " + " | ".join(m.entry_str(i, j) for j in range(n)) for i in range(n)]
    for name, m in (("A", a.indicator.A), ("B", a.indicator.B)):
        lines.append(f"# T {name}")
        lines += ["#   " + " ".join(str(int(v)) for v in row) for row in m]
    lines.append(f"# pattern {pattern} catastrophic={bool(is_catastrophic(a, pattern))}")
    lines.append("p,q,pattern,P_ext")
    lines += [f"{p:.6g},{q:.6g},\"{x}\",{v:.10g}" for p, q, x, v in rows]
    _emit("\n".join(lines), args.out)


def cmd_threshold(args) -> None:
    a = analyze(args.code)
    ens = _ensemble(args, a)
    res = threshold(ens.profile, a, ens.pattern, width=args.width)
    rate = ens.rate
    _emit(json.dumps({
        "code": str(ens.constituent),
        "profile": str(ens.profile),
        "rate": rate,
        "phi_p": ens.phi_p,
        "pattern": str(ens.pattern),
        "p_th": res.p_th,
        "catastrophic": res.catastrophic,
        "gap": (1 - rate) - res.p_th,
    }), args.out)


def cmd_optimize(args) -> None:
    degrees = tuple(int(d) for d in args.degrees.split(",")) if args.degrees else None
    cfg = OptimizerConfig(population_size=args.population, scale_factor=args.F, crossover_rate=args.CR,
                          generations=args.generations, seed=args.seed, d_max=args.dmax,
                          active_degrees=degrees)
    sink = open(args.out, "w") if args.out else sys.stdout

    def report(gen, best):
        sink.write(json.dumps({"generation": gen, "profile": str(best.profile), "phi_p": best.phi_p,
                               "pattern": str(best.pattern), "p_th": best.p_th}) + "\n")
        sink.flush()

    try:
        res = optimize(args.rate, args.code, cfg, callback=report)
        sink.write(json.dumps({"final": True, "profile": str(res.profile), "phi_p": res.phi_p,
                               "pattern": str(res.pattern), "p_th": res.p_th,
                               "evaluations": res.evaluations}) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()


def _prepass(ens: TurboEnsemble) -> PuncturePattern | None:
    # the unpunctured-neighbor pre-pass only matters when something is punctured
    return ens.pattern if ens.phi_p > 0 else None


def cmd_interleave(args) -> None:
    a = analyze(args.code)
    ens = _ensemble(args, a)
    pattern = _prepass(ens)
    graph = peg_build(ens.K, ens.profile, 1, pattern)
    il = graph_to_interleaver(graph)
    out = Path(args.out or "interleaver.txt")
    out.write_text("\n".join(str(v + 1) for v in il.perm) + "\n")
    sidecar = {
        "K": ens.K,
        "N": ens.N,
        "profile": str(ens.profile),
        "pattern": str(ens.pattern) if pattern else None,
        "degree_counts": {str(d): c for d, c in ens.counts.items()},
        "girth": compute_girth(graph, True),
        "girth_without_states": compute_girth(graph, False),
        "girth_lower_bound": girth_lower_bound(ens.N, 1, ens.profile.d_max),
        "girth_upper_bound": girth_upper_bound(ens.N, 1),
    }
    out.with_suffix(out.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(json.dumps(sidecar))


def _load_interleaver(path: str, ens: TurboEnsemble) -> Interleaver:
    perm = np.loadtxt(path, dtype=np.int64, ndmin=1) - 1
    return Interleaver(perm, ens.degrees)


def cmd_simulate(args) -> None:
    a = analyze(args.code)
    ens = _ensemble(args, a)
    if args.interleaver == "peg":
        il = graph_to_interleaver(peg_build(ens.K, ens.profile, 1, _prepass(ens)))
    elif args.interleaver == "random":
        il = random_interleaver(ens.degrees, np.random.default_rng(args.seed))
    else:
        il = _load_interleaver(args.interleaver, ens)
    code = TurboCode(ens, il)
    stop = StopRule(args.max_trials, args.target_errors)
    results = run_fer(code, _floats(args.p0), args.seed, stop, args.max_iterations)
    if args.format == "json":
        config = {k: v for k, v in vars(args).items() if k != "func"}
        config.update(rate=ens.rate, phi_p=ens.phi_p, pattern=str(ens.pattern), N=ens.N,
                      fer_half_crossing=fer_crossing(results))
        _emit(results_json(results, config), args.out)
    else:
        _emit(results_csv(results), args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="becturbo", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, profile=True):
        p.add_argument("--code", default="1,5/7", help="constituent RSC in octal, e.g. 1,5/7")
        p.add_argument("--pattern", help="puncturing pattern, e.g. 1,0")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if profile:
            p.add_argument("--profile", default="f2=1", help="degree fractions, e.g. f2=0.8,f3=0.2")
            p.add_argument("--rate", type=float, help="target coding rate (chooses the pattern)")
            p.add_argument("--normalize", action="store_true", help="rescale fractions to sum 1")

    p = sub.add_parser("analyze", help="alphabets, transition matrices and P_ext on a grid")
    common(p, profile=False)
    p.add_argument("--grid", type=int, default=11, help="grid points per axis on [0,1]")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("threshold", help="density-evolution threshold of an ensemble")
    common(p)
    p.add_argument("--width", type=float, default=1e-4)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("optimize", help="differential-evolution profile search")
    common(p, profile=False)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--dmax", type=int, default=12)
    p.add_argument("--degrees", help="active degrees, e.g. 2,3,11")
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--population", type=int, default=40)
    p.add_argument("--F", type=float, default=0.5)
    p.add_argument("--CR", type=float, default=0.9)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("interleave", help="PEG interleaver (1-based permutation + JSON sidecar)")
    common(p)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--seedless", action="store_true", help="accepted for clarity; PEG is deterministic")
    p.set_defaults(func=cmd_interleave)

    p = sub.add_parser("simulate", help="Monte-Carlo FER/BER of a finite-length code")
    common(p)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--p0", required=True, help="comma-separated channel erasure probabilities")
    p.add_argument("--interleaver", default="peg", help="peg, random, or a permutation file")
    p.add_argument("--max-trials", type=int, default=100_000)
    p.add_argument("--target-errors", type=int, default=100)
    p.add_argument("--max-iterations", type=int, default=200)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
