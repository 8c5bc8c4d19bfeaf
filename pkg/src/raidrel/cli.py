"""Command-line front end: fit, solve, span.

Configurations are JSON documents with components, links, RAID groups
and failure-model sections. Every command writes a run manifest next to
its outputs so results can be reproduced exactly; numeric CSV cells use
full-precision rendering.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .builder import (
    CorrelationSpec,
    DiskModelSpec,
    NO_CORRELATION,
    RebuildSpec,
    SystemModel,
    TTOP_WEIBULL,
    TTR_WEIBULL,
    TTSCR_WEIBULL,
    build_raid_ctmc,
    build_system_ctmc,
    ddf_curve,
    default_detailed_spec,
)
from .ctmc import StateBudgetExceeded, mtta
from .design import SpanPlan, greedy_span
from .distributions import (
    ErlangK,
    Exponential,
    NoValidFit,
    PhaseType3,
    Weibull,
    fit_erlang,
    fit_phase3,
    max_cdf_diff,
    raw_moments,
)
from .hierarchy import DecompositionPlan, decompose_solve
from .presets import CaseConfig
from .simulate import RawGroupSpec, SimOptions, simulate_mtta, simulate_raw
from .topology import ComponentSpec, EnclosurePolicy, RaidGroup, Topology

EXIT_OK, EXIT_MODEL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

_CONFIG_KEYS = {
    "components",
    "links",
    "raid_groups",
    "enclosure_policy",
    "disk_model",
    "rebuild",
    "correlation",
}
_COMPONENT_KEYS = {"id", "kind", "mttf_hr", "mttr_hr"}
HOURS_PER_YEAR = 8760.0


class ConfigError(ValueError):
    pass


def parse_times(spec: str) -> list[float]:
    """Times in hours from "8760,17520", "1y..10y" or "1y..10y:1y" forms."""

    def one(tok: str) -> float:
        tok = tok.strip()
        unit = 1.0
        if tok.endswith("y"):
            unit, tok = HOURS_PER_YEAR, tok[:-1]
        elif tok.endswith("d"):
            unit, tok = 24.0, tok[:-1]
        elif tok.endswith("h"):
            tok = tok[:-1]
        return float(tok) * unit

    if ".." in spec:
        head, _, rest = spec.partition("..")
        rest, _, step_s = rest.partition(":")
        start, stop = one(head), one(rest)
        step = one(step_s) if step_s else HOURS_PER_YEAR
        times = list(np.arange(start, stop + 0.5 * step, step))
    else:
        times = [one(tok) for tok in spec.split(",") if tok.strip()]
    if not times or any(t < 0 for t in times) or any(
        b <= a for a, b in zip(times, times[1:])
    ):
        raise ConfigError(f"bad time specification {spec!r}")
    return times


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _parse_disk_model(doc) -> DiskModelSpec:
    variant = doc.get("variant")
    if variant == "exponential":
        if "rate_per_hr" in doc:
            return DiskModelSpec.exponential(float(doc["rate_per_hr"]))
        return DiskModelSpec.exponential(1.0 / float(doc["mean_hr"]))
    if variant == "three_state":
        if {"sigma", "alpha", "beta"} <= doc.keys():
            return DiskModelSpec.three_state(
                PhaseType3(float(doc["sigma"]), float(doc["alpha"]), float(doc["beta"]))
            )
        return DiskModelSpec.three_state()
    if variant == "detailed":
        return default_detailed_spec()
    raise ConfigError(f"unknown disk_model variant {variant!r}")


def _emit_disk_model(spec: DiskModelSpec) -> dict:
    if spec.variant == "exponential":
        return {"variant": "exponential", "rate_per_hr": spec.rate}
    if spec.variant == "three_state":
        ph = spec.phase
        return {"variant": "three_state", "sigma": ph.sigma, "alpha": ph.alpha, "beta": ph.beta}
    return {"variant": "detailed"}


def config_from_dict(doc: dict, lenient: bool = False) -> CaseConfig:
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        msg = f"unknown config keys: {sorted(unknown)}"
        if not lenient:
            raise ConfigError(msg)
        print(f"warning: {msg}", file=sys.stderr)

    components = []
    for i, comp in enumerate(doc.get("components", [])):
        extra = set(comp) - _COMPONENT_KEYS
        if extra and not lenient:
            raise ConfigError(f"component #{i}: unknown keys {sorted(extra)}")
        try:
            components.append(
                ComponentSpec(
                    id=comp["id"],
                    kind=comp["kind"],
                    mttf_hr=comp.get("mttf_hr"),
                    mttr_hr=comp.get("mttr_hr"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"component #{i} ({comp.get('id', '?')}): {exc}") from exc

    kinds = {c.id: c.kind for c in components}
    links, containment = [], []
    for i, pair in enumerate(doc.get("links", [])):
        if len(pair) != 2:
            raise ConfigError(f"link #{i}: expected [from, to]")
        a, b = pair
        if a not in kinds or b not in kinds:
            raise ConfigError(f"link #{i}: unknown component in {pair}")
        # links out of an enclosure express containment, not connectivity
        (containment if kinds[a] == "enclosure" else links).append((a, b))

    groups = []
    for i, grp in enumerate(doc.get("raid_groups", [])):
        try:
            groups.append(RaidGroup(grp["id"], grp["level"], tuple(grp["members"])))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"raid_group #{i}: {exc}") from exc

    policy = None
    if "enclosure_policy" in doc:
        pol = doc["enclosure_policy"]
        try:
            policy = EnclosurePolicy(
                capacity=int(pol["capacity"]),
                threshold=int(pol["threshold"]),
                mttf_below_hr=float(pol["mttf_below_hr"]),
                mttf_above_hr=float(pol["mttf_above_hr"]),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"enclosure_policy: {exc}") from exc

    try:
        topo = Topology(components, links, groups, containment, policy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    diags = topo.validate()
    if diags:
        raise ConfigError("; ".join(diags))

    disk_model = _parse_disk_model(doc.get("disk_model", {"variant": "exponential", "mean_hr": 33 * 8760}))
    reb = doc.get("rebuild", {"mean_hr": 30.0, "uer_prob": 0.0})
    rebuild = RebuildSpec.from_mean(float(reb["mean_hr"]), float(reb.get("uer_prob", 0.0)))
    p = float(doc.get("correlation", {}).get("p", 0.0))
    corr = CorrelationSpec(p) if p > 0 else NO_CORRELATION
    return CaseConfig(topo, disk_model, rebuild, corr)


def parse_config(path, lenient: bool = False) -> CaseConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc, lenient)


def config_to_dict(case: CaseConfig) -> dict:
    topo = case.topology
    doc = {
        "components": [
            {
                "id": c.id,
                "kind": c.kind,
                **({"mttf_hr": c.mttf_hr} if c.mttf_hr is not None else {}),
                **({"mttr_hr": c.mttr_hr} if c.mttr_hr is not None else {}),
            }
            for c in sorted(topo.components.values(), key=lambda c: c.id)
        ],
        "links": sorted([list(l) for l in topo.links] + [list(c) for c in topo.containment]),
        "raid_groups": [
            {"id": g.id, "level": g.level, "members": list(g.members)}
            for g in topo.raid_groups
        ],
        "disk_model": _emit_disk_model(case.disk_model),
        "rebuild": {
            "mean_hr": 1.0 / case.rebuild.rebuild_rate,
            "uer_prob": case.rebuild.uer_prob,
        },
        "correlation": {"p": case.corr.p},
    }
    if topo.enclosure_policy is not None:
        pol = topo.enclosure_policy
        doc["enclosure_policy"] = {
            "capacity": pol.capacity,
            "threshold": pol.threshold,
            "mttf_below_hr": pol.mttf_below_hr,
            "mttf_above_hr": pol.mttf_above_hr,
        }
    return doc


def write_config(case: CaseConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(case), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------


def _write_manifest(out_path, command: list[str], config_path, seed, outputs, started):
    manifest = {
        "command": command,
        "config_sha256": _file_hash(config_path) if config_path else None,
        "seed": seed,
        "tool_version": __version__,
        "wall_time_s": time.time() - started,
        "outputs": [str(o) for o in outputs],
    }
    with open(out_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _file_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    started = time.time()
    weibull = Weibull(shape=args.shape, scale=args.scale, offset=args.offset)
    moments = raw_moments(weibull)
    outputs = []
    if args.target == "phase3":
        try:
            b1, b2 = fit_phase3(moments)
        except NoValidFit as exc:
            print(f"no valid 3-state fit: {exc}", file=sys.stderr)
            print("suggestion: use --target erlang:3 for this distribution", file=sys.stderr)
            return EXIT_MODEL
        grid = np.linspace(0.0, args.grid_max, args.grid_points)[1:]
        for name, b in (("branch+", b1), ("branch-", b2)):
            hi, lo = max_cdf_diff(b, weibull, grid)
            print(
                f"{name}: sigma={b.sigma:.6e} alpha={b.alpha:.6e} beta={b.beta:.6e} "
                f"cdf_diff=[{lo:+.6f}, {hi:+.6f}]"
            )
        fitted = b1
    else:
        k = int(args.target.split(":", 1)[1])
        erl = fit_erlang(k, weibull)
        print(f"erlang: k={erl.k} lambda={erl.lam:.9f}")
        fitted = erl
    if args.curve_csv:
        grid = np.linspace(0.0, args.grid_max, args.grid_points)[1:]
        with open(args.curve_csv, "w") as fh:
            fh.write("t_hr,pdf_approx,pdf_weibull,hazard_approx,hazard_weibull\n")
            pa, pw = fitted.pdf(grid), weibull.pdf(grid)
            ha, hw = fitted.hazard(grid), weibull.hazard(grid)
            for row in zip(grid, pa, pw, ha, hw):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        outputs.append(args.curve_csv)
    if args.manifest:
        _write_manifest(args.manifest, sys.argv[1:], None, None, outputs, started)
    return EXIT_OK


def _raw_spec_from(case: CaseConfig, group) -> RawGroupSpec:
    n = len(group.members)
    dm = case.disk_model
    if dm.variant == "detailed":
        return RawGroupSpec(
            n=n,
            level=group.level,
            ttop=TTOP_WEIBULL,
            ttr=TTR_WEIBULL,
            ttld=Exponential(dm.ttld_rate),
            ttscr=TTSCR_WEIBULL,
        )
    ttr = Exponential(case.rebuild.rebuild_rate)
    if dm.variant == "exponential":
        return RawGroupSpec(n=n, level=group.level, ttop=Exponential(dm.rate), ttr=ttr)
    return RawGroupSpec(n=n, level=group.level, ttop=dm.phase, ttr=ttr)


def cmd_solve(args) -> int:
    started = time.time()
    try:
        case = parse_config(args.config, args.lenient)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    opts = SimOptions(
        confidence=args.confidence,
        rel_halfwidth=args.epsilon,
        seed=args.seed,
        max_paths=args.max_paths,
    )
    rows = []
    try:
        if args.measure == "mttdil":
            rows.extend(_solve_mttdil(case, args, opts))
        else:
            rows.extend(_solve_ddf(case, args, opts))
    except StateBudgetExceeded as exc:
        print(f"{exc}", file=sys.stderr)
        print("hint: retry with --method decompose", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, RuntimeError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL

    header = "measure,t_hr,value,ci_halfwidth,method,states,seconds"
    lines = [header] + [
        f"{m},{t:.17g},{v:.17g},{ci:.17g},{method},{states},{secs:.3f}"
        for (m, t, v, ci, method, states, secs) in rows
    ]
    text = "\n".join(lines) + "\n"
    outputs = []
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        outputs.append(args.out)
    else:
        sys.stdout.write(text)
    manifest_path = args.manifest or (str(args.out) + ".manifest.json" if args.out else None)
    if manifest_path:
        _write_manifest(manifest_path, sys.argv[1:], args.config, args.seed, outputs, started)
    return EXIT_OK


def _solve_mttdil(case, args, opts):
    t0 = time.time()
    if args.method == "numeric":
        chain = build_system_ctmc(
            case.topology, case.disk_model, case.rebuild, case.corr, args.state_budget
        )
        value = mtta(chain)
        return [("mttdil", 0.0, value, 0.0, "numeric", chain.n, time.time() - t0)]
    if args.method == "decompose":
        plan = DecompositionPlan(state_budget=args.state_budget, sim_options=opts)
        value, report = decompose_solve(
            case.topology, plan, case.disk_model, case.rebuild, case.corr
        )
        states = max(r.states for r in report)
        return [("mttdil", 0.0, value, 0.0, "decompose", states, time.time() - t0)]
    model = SystemModel(case.topology, case.disk_model, case.rebuild, case.corr)
    est = simulate_mtta(model, opts, samples_csv=args.samples_csv)
    return [("mttdil", 0.0, est.mean, est.half_width, "simulate", 0, time.time() - t0)]


def _solve_ddf(case, args, opts):
    if not args.times:
        raise ValueError("--measure ddf requires --times")
    times = parse_times(args.times)
    group = case.topology.raid_groups[0]
    t0 = time.time()
    if args.method == "simulate":
        spec = _raw_spec_from(case, group)
        values, hws = simulate_raw(spec, opts, times=times, per=args.per, n_runs=args.max_paths)
        secs = time.time() - t0
        return [
            ("ddf", t, v, hw, "simulate", 0, secs) for t, v, hw in zip(times, values, hws)
        ]
    chain = build_raid_ctmc(
        len(group.members),
        group.level,
        case.disk_model,
        case.rebuild,
        case.corr,
        state_budget=args.state_budget,
    )
    values = ddf_curve(chain, times, per=args.per)
    secs = time.time() - t0
    return [("ddf", t, v, 0.0, "numeric", chain.n, secs) for t, v in zip(times, values)]


def cmd_span(args) -> int:
    caps = [int(tok) for tok in args.caps.split(",")] if args.caps else None
    if caps is not None and len(caps) == 1:
        caps = caps * args.m
    try:
        plan = greedy_span(args.n, args.m, args.f, caps)
    except ValueError as exc:
        print(f"span error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    for idx, count in enumerate(plan.counts, start=1):
        if count:
            print(f"enclosure{idx}:{count}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="raidrel", description="RAID storage reliability modelling toolkit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="approximate a Weibull lifetime by a phase type")
    p_fit.add_argument("--shape", type=float, required=True)
    p_fit.add_argument("--scale", type=float, required=True)
    p_fit.add_argument("--offset", type=float, default=0.0)
    p_fit.add_argument("--target", default="phase3", help="phase3 or erlang:K")
    p_fit.add_argument("--curve-csv", default=None)
    p_fit.add_argument("--grid-max", type=float, default=2e6)
    p_fit.add_argument("--grid-points", type=int, default=2001)
    p_fit.add_argument("--manifest", default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_solve = sub.add_parser("solve", help="solve a configuration for a reliability measure")
    p_solve.add_argument("config")
    p_solve.add_argument("--measure", choices=["mttdil", "ddf"], default="mttdil")
    p_solve.add_argument("--times", default=None, help='e.g. "1y..10y" or "8760,17520"')
    p_solve.add_argument("--method", choices=["numeric", "simulate", "decompose"], default="numeric")
    p_solve.add_argument("--per", type=float, default=1000.0, help="cohort size for ddf")
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--manifest", default=None)
    p_solve.add_argument("--samples-csv", default=None)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--confidence", type=float, default=0.99)
    p_solve.add_argument("--epsilon", type=float, default=0.01, help="relative half-width target")
    p_solve.add_argument("--max-paths", type=int, default=200_000)
    p_solve.add_argument("--state-budget", type=int, default=500_000)
    p_solve.add_argument("--lenient", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_span = sub.add_parser("span", help="greedy enclosure spanning for a RAID group")
    p_span.add_argument("-n", type=int, required=True)
    p_span.add_argument("-m", type=int, required=True)
    p_span.add_argument("-f", type=int, required=True)
    p_span.add_argument("--caps", default=None, help="comma list, or one value for all")
    p_span.set_defaults(func=cmd_span)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
