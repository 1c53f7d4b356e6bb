"""Command-line entry point: ``vpmap fit|simulate|verify-prior|scale``.

Exit codes: 0 ok, 2 configuration or validation error, 3 data error,
4 numerical error, 5 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, VerificationFailure, VpmapError
from .graph import lattice_graph
from .gmrf import generalized_variance, icar_structure, rw_structure, scale_structure, structure_components
from .inference import diagnostics, dic_waic, run_mcmc, vp_table
from .io import read_dataset, read_latent, write_csv, write_draws, write_json, write_vp_table
from .kld import DEFAULT_GRID, KldConfig, distance_curve, verify_result1
from .simulation import (
    PRIOR_CHOICES,
    SCENARIO_GAMMA,
    SIZE_FACTOR,
    ScenarioSpec,
    SimulationDesign,
    run_replicate,
    summarize,
)

log = logging.getLogger("vpmap")

EXIT_OK = 0


def _manifest(command: str, cfg: RunConfig, seed: Optional[int], argv: Sequence[str]) -> dict:
    return {
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "config_sha256": cfg.sha256,
        "config": cfg.raw,
        "versions": {
            "vpmap": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(cfg: RunConfig, out: Path, seed: Optional[int], jobs: int, argv) -> int:
    graph = cfg.graph("data")
    model = cfg.section("model")
    data = read_dataset(
        cfg.path(cfg.section("data")["counts"]),
        graph.n_areas,
        family=model.get("family", "binomial"),
        n1=model.get("n_times"),
    )
    spec = cfg.model_spec(graph, data.n1)
    priors = cfg.priors(spec.include_iid_main)
    mcmc = cfg.mcmc(seed)
    log.info("fitting %s model, %d x %d cells, %d iterations", spec.interaction_type.value, data.n1, data.n2, mcmc.n_iterations)
    draws = run_mcmc(data, spec, priors, mcmc, jobs=jobs)

    table = vp_table(draws)
    out.mkdir(parents=True, exist_ok=True)
    write_vp_table(out / "vp_table.csv", out / "vp_table.json", table)
    write_draws(out / "draws.csv", draws)
    diag = diagnostics(draws)
    ic = dic_waic(draws, data, spec)
    diag["dic"] = {"dic": ic.dic, "deviance": ic.deviance, "p_d": ic.p_d}
    diag["waic"] = {"waic": ic.waic, "p_waic": ic.p_waic, "lppd": ic.lppd}
    diag["warnings"] = list(ic.warnings) + table.notes
    diag["interaction"] = spec.interaction.metadata()
    write_json(out / "diagnostics.json", diag)
    write_csv(
        out / "latent_means.csv",
        [
            {"block": b, "index": i + 1, "mean": float(v)}
            for b, m in draws.latent_mean.items()
            for i, v in enumerate(m)
        ],
        ("block", "index", "mean"),
    )
    write_json(out / "manifest.json", _manifest("fit", cfg, mcmc.seed, argv))
    for r in table.rows:
        print(f"{r.level1:9s} {r.level2:6s} {r.estimator:8s} {r.mean:.4f} ({r.q025:.4f}, {r.q975:.4f})")
    print(f"DIC {ic.dic:.2f} (deviance {ic.deviance:.2f}; pD {ic.p_d:.2f})  WAIC {ic.waic:.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _sim_task(args):
    scenario, rep, mcmc, seed, design, rep_dir = args
    rec = run_replicate(scenario, rep, mcmc, seed, design)
    name = f"{scenario.scenario}_{scenario.size_level}_{scenario.prior_choice.name}_r{rep:03d}.csv"
    write_csv(rep_dir / name, [rec])
    return rec


def cmd_simulate(cfg: RunConfig, out: Path, seed: Optional[int], jobs: int, argv) -> int:
    sim = cfg.section("simulate")
    kwargs = {}
    if "n_times" in sim:
        kwargs["n1"] = sim["n_times"]
    if "lattice" in sim:
        kwargs["graph"] = cfg.graph("simulate")
    for key in ("alpha", "base_population", "base_seed"):
        if key in sim:
            kwargs[key] = sim[key]
    if "base_effects" in sim:
        kwargs["effects"] = read_latent(cfg.path(sim["base_effects"]))
    design = SimulationDesign(**kwargs)
    mcmc = cfg.mcmc(None)
    seed = mcmc.seed if seed is None else seed
    reps = sim.get("replicates", 10)
    scenarios = [
        ScenarioSpec(sc, size, prior, reps)
        for sc in sim.get("scenarios", list(SCENARIO_GAMMA))
        for size in sim.get("size_levels", list(SIZE_FACTOR))
        for prior in sim.get("priors", list(PRIOR_CHOICES))
    ]
    rep_dir = out / "replicates"
    rep_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(s, r, mcmc, seed, design, rep_dir) for s in scenarios for r in range(reps)]
    log.info("simulate: %d scenario cells x %d replicates", len(scenarios), reps)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_sim_task, tasks))
    else:
        records = [_sim_task(t) for t in tasks]
    write_csv(out / "simulation_replicates.csv", records)
    summary = summarize(records)
    write_csv(out / "simulation_summary.csv", summary)
    write_json(out / "manifest.json", _manifest("simulate", cfg, seed, argv))
    for row in summary:
        print(
            f"{row['scenario']} {row['size_level']:8s} {row['prior']:14s} "
            f"gamma {row['gamma_mean_avg']:.4f} (sd {row['gamma_mean_sd']:.4f}, true {row['true_gamma']:.4f})"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-prior
# ---------------------------------------------------------------------------

def cmd_verify_prior(cfg: RunConfig, out: Path, seed: Optional[int], jobs: int, argv) -> int:
    opts = cfg.section("verify_prior")
    psi = tuple(opts.get("psi", (0.5, 0.5)))
    graph = cfg.graph("verify_prior") if "graph" in opts else None
    n2 = graph.n_areas if graph is not None else opts.get("n2", 4)
    configs = [
        KldConfig(
            type=t,
            n1=opts.get("n1", 4),
            n2=n2,
            order=o,
            phi=opts.get("phi", 0.5),
            iid=psi if iid else None,
            gamma0=opts.get("gamma0", 1e-6),
            grid=tuple(opts.get("grid", DEFAULT_GRID)),
            graph=graph,
        )
        for t in opts.get("types", ["I", "II", "III", "IV"])
        for o in opts.get("orders", [1, 2])
        for iid in opts.get("iid", [False, True])
    ]
    if opts.get("scaled", True):
        reports, ok = verify_result1(configs)
    else:
        # unscaled structures are rejected by the interaction builder
        c = configs[0]
        distance_curve(c.type, rw_structure(c.n1, c.order), icar_structure(graph or lattice_graph(1, c.n2)), c.phi, c.iid)
        raise VerificationFailure("unscaled structures were accepted")
    rows = [row for r in reports for row in r.rows()]
    write_csv(out / "kld_report.csv", rows)
    write_json(out / "manifest.json", _manifest("verify-prior", cfg, None, argv))
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        iid = "iid" if r.includes_iid else "no-iid"
        print(
            f"{status} type {r.interaction_type:3s} rw{r.order} {iid:6s} m={r.m:3d} "
            f"fitted {r.dominant_constant:.6g} expected {r.expected_constant:.6g} "
            f"spread {r.relative_spread:.2e}"
        )
        for note in r.notes:
            log.info("type %s rw%d: %s", r.interaction_type, r.order, note)
    if not ok:
        raise VerificationFailure("distance check failed for at least one configuration")
    return EXIT_OK


# ---------------------------------------------------------------------------
# scale
# ---------------------------------------------------------------------------

def cmd_scale(cfg: RunConfig, out: Path, seed: Optional[int], jobs: int, argv) -> int:
    opts = cfg.section("scale")
    kind = opts["kind"]
    if kind in ("rw1", "rw2"):
        if "n" not in opts:
            raise ConfigError("scale: n is required for rw1/rw2")
        R = rw_structure(opts["n"], 1 if kind == "rw1" else 2)
    else:
        R = icar_structure(cfg.graph("scale"))
    scaled = scale_structure(R)
    blocks = [b for b in structure_components(R) if b.size > 1 or kind != "icar"]
    comps = []
    for b in blocks:
        comps.append({
            "size": int(b.size),
            "gv_before": generalized_variance(R.entries[np.ix_(b, b)]),
            "gv_after": generalized_variance(scaled.entries[np.ix_(b, b)]),
        })
    report = {
        "kind": kind,
        "n": R.order,
        "rank": R.rank,
        "null_dimension": R.order - R.rank,
        "n_components": len(structure_components(R)),
        "components": comps,
    }
    if len(comps) == 1:
        report["gv_before"], report["gv_after"] = comps[0]["gv_before"], comps[0]["gv_after"]
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "scale_report.json", report)
    if opts.get("dump_matrix"):
        np.savetxt(out / "scaled_matrix.csv", scaled.entries, delimiter=",", fmt="%.17g")
    write_json(out / "manifest.json", _manifest("scale", cfg, None, argv))
    print(f"kind {kind}  n {R.order}  rank {R.rank}  null dimension {R.order - R.rank}")
    for i, c in enumerate(comps):
        print(f"block {i + 1} (size {c['size']}): GV before {c['gv_before']:.17g}  after {c['gv_after']:.17g}")
    return EXIT_OK


COMMAND_FUNCS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "verify-prior": cmd_verify_prior,
    "scale": cmd_scale,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vpmap", description="Variance-partitioning space-time disease mapping.")
    p.add_argument("--version", action="version", version=f"vpmap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMAND_FUNCS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for chains or replicates")
        s.add_argument("--seed", type=int, default=None, help="overrides mcmc.seed")
        s.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get("VPMAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = load_config(args.config, args.command)
        out = cfg.output_dir(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMAND_FUNCS[args.command](cfg, out, args.seed, args.jobs, argv)
    except VpmapError as exc:
        print(f"vpmap {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"vpmap {args.command}: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
