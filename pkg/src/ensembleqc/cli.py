"""Config-driven experiment runner.

    ensembleqc run configs/ghz_q4.yaml --trials 100000 --seed 7
    ensembleqc sweep configs/dh_sweep.yaml --format csv --out dh.csv

Exit codes: 0 success, 2 invalid config, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Any, Callable

import numpy as np

from . import montecarlo as mc
from .blockade import (BlockadeParams, IntegratorError, aggregates, integrate_amplitudes,
                       pulse_analytics, sample_cloud, single_qubit_fidelity)
from .config import ConfigError, ExperimentConfig, from_dict, load
from .errorbudget import AbsorptionInputs, BudgetInputs, RB87_MASS, budget
from .graphstate import (GraphRef, build_graph_state, expected_attempts, geometric_attempts,
                         is_local_clifford_equivalent, measure_pauli, resource_overhead)
from .protocols import (ProtocolParams, ProtocolRun, blockade_entangle, dlcz_entangle, dlcz_swap,
                        double_heralding_full, fusion_probability, ghz_generate, psi_pair)
from .qstate import StateError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# per-kind runners: each returns (closed_form, fidelities, monte_carlo | None)

def _protocol_record(run: ProtocolRun, cfg: ExperimentConfig, threads: int):
    closed = {"success_probability": run.success_probability}
    if run.closed_form is not None:
        closed["closed_form_probability"] = run.closed_form
    closed["outcomes"] = {k: p for k, p, _ in run.table}
    fid = {"min": run.min_fidelity(), "mean": run.mean_fidelity(),
           "per_herald": {k: h.fidelity_vs_target for k, h in sorted(run.heralds.items())}}
    mcr = None
    if cfg.trials > 0:
        tally = run.sample(cfg.trials, cfg.seed, threads)
        mcr = tally.as_dict()
        ref = run.closed_form if run.closed_form is not None else run.success_probability
        mcr["sigma_from_closed_form"] = ((tally.estimate.frequency - ref) / tally.estimate.sigma_for(ref)
                                         if 0 < ref < 1 else None)
    return closed, fid, mcr


def _run_dlcz(cfg, threads):
    p = cfg.params
    pp = ProtocolParams(eta_D=p["eta_D"], p_e=p["p_e"])
    if p["swap"]:
        run = dlcz_swap(psi_pair(("A", "C")), psi_pair(("B", "D")), retrieval=p["retrieval"])
    else:
        run = dlcz_entangle(pp, higher_order=p["higher_order"])
    return _protocol_record(run, cfg, threads)


def _run_double_heralding(cfg, threads):
    eta = cfg.params["eta"]
    if not 0 <= eta <= 1:
        raise ConfigError("params.eta", "must lie in [0, 1]")
    return _protocol_record(double_heralding_full(eta), cfg, threads)


def _pp(p: dict, *names) -> ProtocolParams:
    kw = {}
    for n in names:
        kw[n] = p[n]
    try:
        return ProtocolParams(**kw)
    except ValueError as e:
        raise ConfigError(_guess_field(str(e), names), str(e)) from None


def _run_blockade_entangle(cfg, threads):
    p = cfg.params
    pp = _pp(p, "eta_D", "eta_S", "epsilon", "F_source", "coincidence_leak", "dark_rate", "window")
    if p["variant"] not in ("hom", "dual_rail", "polarisation"):
        raise ConfigError("params.variant", "must be hom, dual_rail or polarisation")
    return _protocol_record(blockade_entangle(pp, p["variant"], p["stored"]), cfg, threads)


def _run_ghz(cfg, threads):
    p = cfg.params
    pp = _pp(p, "Q", "eta_D", "eta_S", "dark_rate", "window")
    closed, fid, mcr = _protocol_record(ghz_generate(pp), cfg, threads)
    closed["eta"] = pp.eta
    return closed, fid, mcr


def _run_fusion(cfg, threads):
    p = cfg.params
    if not 0 < p["eta_prime"] <= 1:
        raise ConfigError("params.eta_prime", "must lie in (0, 1]")
    pf = fusion_probability(p["eta_prime"])
    closed = {"fusion_probability": pf, "expected_attempts": expected_attempts(pf)}
    mcr = None
    if cfg.trials > 0:
        a = geometric_attempts(pf, cfg.trials, cfg.seed, threads)
        mcr = {"trials": cfg.trials, "mean_attempts": float(a.mean()),
               "stderr_attempts": float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else None,
               "overhead": resource_overhead(p["strategy"], pf, p["target_size"], cfg.trials,
                                             cfg.seed, p["block_size"]).as_dict()}
    return closed, {}, mcr


def _run_blockade_numerics(cfg, threads):
    p = cfg.params
    N, Omega = p["N"], p["Omega"]
    if N < 2:
        raise ConfigError("params.N", "need at least two atoms")
    if Omega <= 0:
        raise ConfigError("params.Omega", "must be positive")
    if (p["B"] is None) == (p["C6"] is None):
        raise ConfigError("params.B", "give exactly one of B or C6")
    if not 1e-13 <= p["tol"] <= 1e-3:
        raise ConfigError("params.tol", "must lie in [1e-13, 1e-3]")
    mcr = None
    if p["B"] is not None:
        if p["B"] <= 0:
            raise ConfigError("params.B", "must be positive")
        if cfg.trials > 0:
            raise ConfigError("trials", "a fixed blockade shift has nothing to sample; use C6")
        bp = BlockadeParams.from_blockade_shift(N, p["B"])
        shifts = np.full(N * (N - 1) // 2, p["B"])
    else:
        bp = aggregates(sample_cloud(N, p["sigma_z"], p["sigma_xy"], mc.stream(cfg.seed, 0)), p["C6"])
        shifts = bp.shifts
        if cfg.trials > 0:
            P2 = np.array([pulse_analytics(N, Omega, aggregates(
                sample_cloud(N, p["sigma_z"], p["sigma_xy"], mc.stream(cfg.seed, i)), p["C6"])).P2
                for i in range(cfg.trials)])
            mcr = {"trials": cfg.trials, "mean_P2": float(P2.mean()),
                   "stderr_P2": float(P2.std(ddof=1) / math.sqrt(len(P2))) if len(P2) > 1 else None}
    a = pulse_analytics(N, Omega, bp)
    closed = {"l": a.l, "t_pi": a.t_pi, "P1": a.P1, "P2": a.P2, "P2_blockade_form": a.P2_blockade_form,
              "delta_omega": a.delta_omega, "B": bp.B, "delta_bar": bp.delta_bar,
              "delta_bar_p2": bp.delta_bar_p2}
    fid = {"F_single": single_qubit_fidelity(a.P2, p["P_decay"])}
    if p["integrate"]:
        tr = integrate_amplitudes(N, Omega, shifts, t_end=a.t_pi, tol=p["tol"], classes=p["classes"],
                                  t_eval=np.linspace(0.0, a.t_pi, 101))
        closed["integrated"] = {"P2_at_t_pi": float(tr.p_double[-1]), "P1_at_t_pi": float(tr.p_single[-1]),
                                "max_deviation_from_analytic": float(np.max(np.abs(
                                    tr.p_single - a.p_single(tr.t, N, Omega)))),
                                "method": tr.method}
    return closed, fid, mcr


def _run_error_budget(cfg, threads):
    p = cfg.params
    if cfg.trials > 0:
        raise ConfigError("trials", "the error budget is closed-form only")
    ab = AbsorptionInputs(p["wavelength"], p["gamma0"], p["gamma"], p["N_i"], p["area"], p["waist"],
                          p["length"])
    keys = ("two_photon_form", "gamma_dc", "t_protocol", "p_success", "density", "sigma_col",
            "temperature", "decay_rate", "decay_time", "noise_overlap", "mode_mismatch",
            "two_photon_absorption")
    rep = budget(BudgetInputs(ab, mass=p["mass"] or RB87_MASS, **{k: p[k] for k in keys}))
    d = rep.as_dict()
    fid = {"F_final": d.pop("F_final"), "F_single_weight": d.pop("F_single_weight")}
    return d, fid, None


def _graph_from(spec: Any, field: str) -> GraphRef:
    if not isinstance(spec, dict):
        raise ConfigError(field, "graph must be a mapping")
    kind = spec.get("type", "adjacency")
    if kind in ("chain", "star", "complete"):
        n = spec.get("n")
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"{field}.n", "must be a positive integer")
        return getattr(GraphRef, kind)(n)
    if kind == "adjacency":
        adj = spec.get("adjacency")
        if not adj:
            raise ConfigError(f"{field}.adjacency", "must map each vertex to its neighbours")
        try:
            return GraphRef.from_adjacency({v: n for v, n in adj})
        except ValueError as e:
            raise ConfigError(f"{field}.adjacency", str(e)) from None
    raise ConfigError(f"{field}.type", "must be chain, star, complete or adjacency")


def _measure_all(g: GraphRef, steps: list, rng):
    t = build_graph_state(g)
    outcomes = []
    for v, basis, forced in steps:
        res = measure_pauli(t, v, basis, rng, forced, remove=True)
        outcomes.append((res.outcome, res.probability))
        t = res.tableau
    return t, outcomes


def _run_graph_study(cfg, threads):
    p = cfg.params
    g = _graph_from(p["graph"], "params.graph")
    steps = []
    for i, m in enumerate(p["measurements"] or []):
        f = f"params.measurements[{i}]"
        if isinstance(m, dict):
            v, basis, forced = m.get("vertex"), m.get("basis"), m.get("outcome")
        elif isinstance(m, list) and len(m) in (2, 3):
            v, basis, forced = (m + [None])[:3]
        else:
            raise ConfigError(f, "expected [vertex, basis] or {vertex, basis, outcome}")
        if v not in g.vertices:
            raise ConfigError(f, f"vertex {v!r} not in graph")
        if basis not in ("X", "Y", "Z"):
            raise ConfigError(f, "basis must be X, Y or Z")
        if forced not in (None, 1, -1):
            raise ConfigError(f, "outcome must be +1 or -1")
        steps.append((v, basis, forced))
    t, outs = _measure_all(g, steps, mc.stream(cfg.seed, 0))
    closed: dict[str, Any] = {
        "initial_stabilizers": build_graph_state(g).strings(),
        "final_qubits": list(t.labels), "final_stabilizers": t.strings(),
        "outcomes": [o for o, _ in outs], "outcome_probabilities": [q for _, q in outs]}
    ag = t.as_graph() if t.n else None
    closed["final_graph"] = ({str(k): sorted(v, key=str) for k, v in ag[0].adjacency_lists().items()}
                             if ag else None)
    if p["compare_to"] is not None:
        other = _graph_from(p["compare_to"], "params.compare_to")
        if set(other.vertices) != set(t.labels):
            raise ConfigError("params.compare_to", "must act on the remaining qubits")
        ok, wit = is_local_clifford_equivalent(t, build_graph_state(other))
        closed["lc_equivalent"] = ok
        closed["lc_witness"] = {str(k): v for k, v in wit.non_identity().items()} if ok else None
    if p["p_link"] is not None:
        if not 0 < p["p_link"] <= 1:
            raise ConfigError("params.p_link", "must lie in (0, 1]")
        closed["expected_attempts"] = expected_attempts(p["p_link"])
    mcr = None
    if cfg.trials > 0:
        mcr = {"trials": cfg.trials}
        if steps:
            tallies: dict[str, int] = {}
            for i in range(cfg.trials):
                _, o = _measure_all(g, steps, mc.stream(cfg.seed, i + 1))
                key = ",".join("+" if x > 0 else "-" for x, _ in o)
                tallies[key] = tallies.get(key, 0) + 1
            mcr["tallies"] = dict(sorted(tallies.items()))
        if p["p_link"] is not None:
            a = geometric_attempts(p["p_link"], cfg.trials, cfg.seed, threads)
            mcr["mean_attempts"] = float(a.mean())
            mcr["stderr_attempts"] = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else None
    return closed, {}, mcr


RUNNERS: dict[str, Callable] = {
    "dlcz": _run_dlcz, "double_heralding": _run_double_heralding,
    "blockade_entangle": _run_blockade_entangle, "ghz": _run_ghz, "fusion": _run_fusion,
    "blockade_numerics": _run_blockade_numerics, "error_budget": _run_error_budget,
    "graph_study": _run_graph_study,
}


def _guess_field(msg: str, names) -> str:
    for n in sorted(names, key=len, reverse=True):
        if n in msg:
            return f"params.{n}"
    return "params"


# ---------------------------------------------------------------------------
# records

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def run(cfg: ExperimentConfig, threads: int = 1, timing: bool = False) -> dict:
    """Execute one experiment and return its result record."""
    t0 = time.perf_counter()
    try:
        closed, fid, mcr = RUNNERS[cfg.kind](cfg, threads)
    except (ConfigError, IntegratorError, StateError, ArithmeticError, np.linalg.LinAlgError):
        raise
    except ValueError as e:
        raise ConfigError(_guess_field(str(e), cfg.params), str(e)) from None
    rec = {"config": cfg.echo(), "closed_form": closed, "fidelities": fid}
    if cfg.trials > 0:
        rec["monte_carlo"] = mcr or {"trials": cfg.trials}
    if timing:
        rec["wall_time"] = time.perf_counter() - t0
    return _clean(rec)


def sweep(cfg: ExperimentConfig, threads: int = 1, timing: bool = False) -> list[dict]:
    if cfg.sweep is None:
        raise ConfigError("sweep", "config has no sweep section")
    return [run(cfg.with_param(cfg.sweep.parameter, v), threads, timing) for v in cfg.sweep.values]


def dumps(record) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, allow_nan=False)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v, sort_keys=True)
        else:
            out[key] = v
    return out


def to_csv(records: list[dict], parameter: str) -> str:
    rows = []
    for r in records:
        row = {parameter: r["config"]["params"][parameter]}
        for sec in ("closed_form", "fidelities", "monte_carlo", "wall_time"):
            if sec in r:
                row.update(_flatten(r[sec], sec + ".") if isinstance(r[sec], dict) else {sec: r[sec]})
        rows.append(row)
    cols = [parameter] + sorted({k for r in rows for k in r} - {parameter})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ensembleqc", description="Run ensemble quantum-computing experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run one experiment"), ("sweep", "run every point of a sweep")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="YAML experiment config")
        sp.add_argument("--trials", type=int, default=None, help="override Monte Carlo trials")
        sp.add_argument("--seed", type=int, default=None, help="override the 64-bit seed")
        sp.add_argument("--out", default=None, help="write output here instead of stdout")
        sp.add_argument("--format", choices=("record", "csv"), default="record")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sampling")
        sp.add_argument("--timing", action="store_true", help="include wall time in records")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
        if args.trials is not None or args.seed is not None:
            d = cfg.echo()
            if args.trials is not None:
                d["trials"] = args.trials
            if args.seed is not None:
                d["seed"] = args.seed
            cfg = from_dict(d)
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        if args.command == "run":
            if args.format == "csv":
                raise ConfigError("--format", "csv output is only available for sweeps")
            text = dumps(run(cfg, args.threads, args.timing)) + "\n"
        else:
            recs = sweep(cfg, args.threads, args.timing)
            text = (to_csv(recs, cfg.sweep.parameter) if args.format == "csv"
                    else "".join(dumps(r) + "\n" for r in recs))
    except ConfigError as e:
        print(json.dumps({"error": "validation", "field": e.field, "message": str(e)}), file=sys.stderr)
        return EXIT_INVALID
    except (IntegratorError, StateError, ArithmeticError, np.linalg.LinAlgError) as e:
        diag = getattr(e, "diagnostics", None) or {}
        print(json.dumps(_clean({"error": "numerical", "message": str(e), "diagnostics": diag})),
              file=sys.stderr)
        return EXIT_NUMERICAL
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
