"""Reproducible experiment runner.

Usage: brwlab --config cfg.json [--seed N] [--workers N] [--out DIR]

Each run writes a fixed-name CSV (or JSON report) plus manifest.json into
the output directory.  Replicate work is sharded over counter-based
substreams keyed by (seed, replicate index) only, so CSV bodies are byte
identical for any worker count.  Exit status: 0 pass, 2 failed assertion,
1 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from multiprocessing import Pool

import numpy as np

from . import __version__, groups, intersections, magic, mtp
from .gw import OffspringDistribution, sample_marked_fuzz_tree
from .rng import substream

EXPERIMENTS = ("spectra", "visits", "magic-fuzz", "mtp-test", "intersect", "thin-sweep", "ends")

CAPS = {
    "replicates": 1_000_000,
    "n_trees": 1_000_000,
    "n_samples": 1_000_000,
    "depth": 64,
    "n_max": 60_000,
    "budget": 10_000_000,
    "max_vertices": 5_000,
}

_RNG_NOTE = "philox counter-based; substream(i) = Philox(SeedSequence((seed, i)))"


class ConfigError(ValueError):
    pass


def _need(cfg, key, kind, lo=None, hi=None):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    val = cfg[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"config key {key!r} must be {kind.__name__}")
    if lo is not None and val < lo:
        raise ConfigError(f"config key {key!r} must be >= {lo}")
    if hi is not None and val > hi:
        raise ConfigError(f"config key {key!r} must be <= {hi}")
    return val


def _group_from(cfg) -> groups.GroupSpec:
    g = _need(cfg, "group", dict)
    try:
        return groups.GroupSpec(g.get("kind", ""), int(g.get("param", 0)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad group spec: {exc}") from exc


def _offspring_from(cfg, key) -> OffspringDistribution:
    pmf = _need(cfg, key, list)
    try:
        return OffspringDistribution(pmf)
    except ValueError as exc:
        raise ConfigError(f"bad offspring distribution {key!r}: {exc}") from exc


def _grid(cfg, key, kind=float):
    vals = _need(cfg, key, list)
    if not vals:
        raise ConfigError(f"grid {key!r} must be nonempty")
    return [kind(v) for v in vals]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# finite graphs for the fixed-graph samplers


def _finite_graph(cfg):
    spec = _need(cfg, "graph", dict)
    shape = spec.get("shape")
    n = int(spec.get("n", 0))
    if shape == "path":
        if n < 2:
            raise ConfigError("path graph needs n >= 2")
        adj = {i: [] for i in range(n)}
        for i in range(n - 1):
            adj[i].append(i + 1)
            adj[i + 1].append(i)
    elif shape == "star":
        if n < 2:
            raise ConfigError("star graph needs n >= 2")
        adj = {i: [] for i in range(n)}
        for i in range(1, n):
            adj[0].append(i)
            adj[i].append(0)
    else:
        raise ConfigError(f"unknown finite graph shape {shape!r}")
    marks_rule = spec.get("marks", "all")
    if marks_rule == "all":
        marks = set(adj)
    elif marks_rule == "leaves":
        marks = {v for v, ns in adj.items() if len(ns) == 1}
    else:
        raise ConfigError(f"unknown marks rule {marks_rule!r}")
    return adj, marks


# ---------------------------------------------------------------------------
# sharded experiments: one worker call covers a block of replicate indices


def _mtp_sampler_from(cfg):
    sampler = _need(cfg, "sampler", str)
    if sampler == "uniform_root":
        adj, marks = _finite_graph(cfg)
        return mtp.uniform_root_sampler(adj, marks)
    if sampler == "fixed_root":
        adj, marks = _finite_graph(cfg)
        root = int(cfg.get("root_index", 0))
        if root not in adj:
            raise ConfigError("root_index outside the graph")
        return mtp.fixed_root_sampler(adj, marks, root)
    if sampler == "pullback":
        g = _group_from(cfg)
        mu = _offspring_from(cfg, "offspring")
        depth = _need(cfg, "depth", int, 1, CAPS["depth"])
        rule = cfg.get("a_rule", "origin")
        kwargs = {"budget": int(cfg.get("budget", 1_000_000))}
        if rule == "ball":
            kwargs["ball_radius"] = int(cfg.get("ball_radius", 1))
        if rule == "trace":
            if "offspring2" in cfg:
                kwargs["mu2"] = _offspring_from(cfg, "offspring2")
            if "depth2" in cfg:
                kwargs["depth2"] = _need(cfg, "depth2", int, 1, CAPS["depth"])
        try:
            return mtp.pullback_sampler(g, mu, depth, rule, **kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if sampler == "pushforward":
        g = _group_from(cfg)
        mu = _offspring_from(cfg, "offspring")
        depth = _need(cfg, "depth", int, 1, CAPS["depth"])
        radius = _need(cfg, "ball_radius", int, 1, 16)
        return mtp.pushforward_trace_sampler(
            g, mu, depth, radius, budget=int(cfg.get("budget", 1_000_000))
        )
    raise ConfigError(f"unknown sampler {sampler!r}")


def _shard_magic_fuzz(cfg, seed, lo, hi):
    max_vertices = cfg["max_vertices"]
    k_grid = cfg["k_grid"]
    r_grid = cfg["r_grid"]
    rows = []
    violations = 0
    for idx in range(lo, hi):
        rng = substream(seed, idx)
        tree = sample_marked_fuzz_tree(rng, max_vertices)
        T = magic.OrientedTree.from_tree(tree)
        branch_vals = magic.branch_deficiency_values(T, r_grid)
        for r in r_grid:
            gaps = magic.supported_gap_values(T, r)
            vals = list(branch_vals[r].values())
            gap_vals = list(gaps.values())
            for k in k_grid:
                bcount = sum(1 for v in vals if v >= k)
                scount = sum(1 for gp in gap_vals if gp >= k)
                bound = r * (2.0 * T.n_marks - k) / k
                ok = bcount <= max(bound, 0.0)
                if not ok:
                    violations += 1
                rows.append(
                    (idx, T.n_vertices, T.n_marks, k, r, bcount, scount, bound, ok)
                )
    return rows, violations


def _shard_mtp(cfg, seed, lo, hi):
    sampler = _mtp_sampler_from(cfg)
    F = mtp.BUILTIN_TRANSPORT[cfg["f"]]
    W = mtp.BUILTIN_WEIGHT[cfg["w"]]
    deltas = []
    weights = []
    inconclusive = 0
    for idx in range(lo, hi):
        got = mtp.evaluate_sample(sampler(substream(seed, idx)), F, W)
        if got is None:
            inconclusive += 1
        else:
            deltas.append(got[0])
            weights.append(got[1])
    return [], (deltas, weights, inconclusive)


def _shard_intersect(cfg, seed, lo, hi):
    g = groups.GroupSpec(**cfg["group_spec"])
    mu1 = OffspringDistribution(cfg["pmf1"])
    mu2 = OffspringDistribution(cfg["pmf2"])
    depth = cfg["depth"]
    budget = cfg["budget"]
    e = g.identity()
    rows = []
    for idx in range(lo, hi):
        rng = substream(seed, idx)
        rec = intersections.sample_intersections(mu1, mu2, g, e, e, depth, depth, rng, budget)
        rows.append((idx, rec.pair_count, len(rec.intersection), rec.truncated))
    return rows, None


def _shard_thin_sweep(cfg, seed, lo, hi):
    g = groups.GroupSpec(**cfg["group_spec"])
    mu1 = OffspringDistribution(cfg["pmf1"])
    mu2 = OffspringDistribution(cfg["pmf2"])
    rows = []
    violations = 0
    for idx in range(lo, hi):
        rng = substream(seed, idx)
        rep = intersections.thinned_intersection_sweep(
            mu1, mu2, g, cfg["p_grid"], cfg["depth"], 1, rng, cfg["budget"]
        )[0]
        ps = sorted(rep.sets)
        for a, b in zip(ps, ps[1:]):
            if not rep.sets[a] <= rep.sets[b]:
                violations += 1
        for p in ps:
            rows.append((p, idx, len(rep.sets[p]), rep.pair_counts[p], rep.truncated))
    return rows, violations


def _shard_ends(cfg, seed, lo, hi):
    g = groups.GroupSpec(**cfg["group_spec"])
    mu = OffspringDistribution(cfg["pmf"])
    rows = []
    for idx in range(lo, hi):
        rng = substream(seed, idx)
        res = intersections.trace_ends_experiment(
            mu, g, cfg["depth"], cfg["radius_grid"], cfg["m_threshold"], 1, rng, cfg["budget"]
        )
        for j, radius in enumerate(res.radii):
            rows.append((radius, idx, int(res.qualifying[0, j]), bool(res.survived[0])))
    return rows, None


_SHARDS = {
    "magic-fuzz": (_shard_magic_fuzz, 100),
    "mtp-test": (_shard_mtp, 200),
    "intersect": (_shard_intersect, 400),
    "thin-sweep": (_shard_thin_sweep, 100),
    "ends": (_shard_ends, 100),
}


def _shard_worker(args):
    name, cfg, seed, lo, hi = args
    return lo, _SHARDS[name][0](cfg, seed, lo, hi)


def _run_sharded(name, cfg, seed, n_units, workers):
    block = _SHARDS[name][1]
    tasks = [
        (name, cfg, seed, lo, min(lo + block, n_units))
        for lo in range(0, n_units, block)
    ]
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            parts = pool.map(_shard_worker, tasks)
    else:
        parts = [_shard_worker(t) for t in tasks]
    parts.sort(key=lambda item: item[0])
    rows = []
    extras = []
    for _, (shard_rows, extra) in parts:
        rows.extend(shard_rows)
        extras.append(extra)
    return rows, extras


# ---------------------------------------------------------------------------
# experiment drivers


def _run_spectra(cfg, seed, workers, out_dir):
    g = _group_from(cfg)
    n_max = _need(cfg, "n_max", int, 1, CAPS["n_max"])
    stride = int(cfg.get("stride", max(1, n_max // 2000)))
    traj = groups.spectral_radius_trajectory(g, n_max)
    picks = sorted(set(range(stride, n_max + 1, stride)) | {n_max})
    rows = [(2 * n, float(traj[n - 1])) for n in picks]
    _write_csv(os.path.join(out_dir, "spectra.csv"), ("n", "estimate"), rows)
    return 0, {"closed_form": g.spectral_radius_closed_form(), "estimate": float(traj[-1])}


def _run_visits(cfg, seed, workers, out_dir):
    g = _group_from(cfg)
    mean = _need(cfg, "mean", float, 0.0)
    n_max = _need(cfg, "n_max", int, 1, CAPS["n_max"])
    stride = int(cfg.get("stride", 1))
    series = groups.visits_series(g, mean, n_max)
    picks = sorted(set(range(0, n_max + 1, stride)) | {n_max})
    rows = [(n, float(series.partial_sums[n])) for n in picks]
    _write_csv(os.path.join(out_dir, "visits.csv"), ("n", "partial_sum"), rows)
    extra = {
        "diverged": series.diverged,
        "guard_index": series.guard_index,
        "final_sum": float(series.partial_sums[-1]),
    }
    return 0, extra


def _run_magic_fuzz(cfg, seed, workers, out_dir):
    norm = {
        "max_vertices": _need(cfg, "max_vertices", int, 1, CAPS["max_vertices"]),
        "k_grid": _grid(cfg, "k_grid", int),
        "r_grid": _grid(cfg, "r_grid", int),
    }
    if any(k < 1 for k in norm["k_grid"]) or any(r < 1 for r in norm["r_grid"]):
        raise ConfigError("k_grid and r_grid entries must be >= 1")
    n_trees = _need(cfg, "n_trees", int, 1, CAPS["n_trees"])
    rows, extras = _run_sharded("magic-fuzz", norm, seed, n_trees, workers)
    violations = sum(extras)
    _write_csv(
        os.path.join(out_dir, "magic_fuzz.csv"),
        ("tree_id", "n_vertices", "n_marks", "k", "r", "branching_count",
         "supported_count", "bound", "pass"),
        rows,
    )
    return (0 if violations == 0 else 2), {"bound_violations": violations}


def _run_mtp_test(cfg, seed, workers, out_dir):
    if cfg.get("f") not in mtp.BUILTIN_TRANSPORT:
        raise ConfigError(f"unknown transport function {cfg.get('f')!r}")
    if cfg.get("w") not in mtp.BUILTIN_WEIGHT:
        raise ConfigError(f"unknown weight {cfg.get('w')!r}")
    n_samples = _need(cfg, "n_samples", int, 1000, CAPS["n_samples"])
    alpha = _need(cfg, "alpha", float)
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must be in (0, 1)")
    _mtp_sampler_from(cfg)  # validate sampler config before sharding
    _, extras = _run_sharded("mtp-test", cfg, seed, n_samples, workers)
    deltas = []
    weights = []
    inconclusive = 0
    for d, w, inc in extras:
        deltas.extend(d)
        weights.extend(w)
        inconclusive += inc
    try:
        report = mtp.aggregate_mtp_report(deltas, weights, inconclusive, n_samples, alpha)
    except mtp.TruncationError as exc:
        raise ConfigError(str(exc)) from exc
    with open(os.path.join(out_dir, "mtp_report.json"), "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return (0 if report.passed else 2), {"report": report.to_json_dict()}


def _norm_pair_cfg(cfg):
    g = _group_from(cfg)
    mu1 = _offspring_from(cfg, "offspring1")
    mu2 = _offspring_from(cfg, "offspring2") if "offspring2" in cfg else mu1
    return {
        "group_spec": {"kind": g.kind, "param": g.param},
        "pmf1": mu1.pmf.tolist(),
        "pmf2": mu2.pmf.tolist(),
        "depth": _need(cfg, "depth", int, 0, CAPS["depth"]),
        "budget": int(cfg.get("budget", 1_000_000)),
    }


def _run_intersect(cfg, seed, workers, out_dir):
    norm = _norm_pair_cfg(cfg)
    replicates = _need(cfg, "replicates", int, 2, CAPS["replicates"])
    rows, _ = _run_sharded("intersect", norm, seed, replicates, workers)
    _write_csv(
        os.path.join(out_dir, "intersect.csv"),
        ("replicate", "pair_count", "intersection_size", "truncated"),
        rows,
    )
    g = groups.GroupSpec(**norm["group_spec"])
    e = g.identity()
    mu1 = OffspringDistribution(norm["pmf1"])
    mu2 = OffspringDistribution(norm["pmf2"])
    exact = intersections.expected_pairs_truncated(mu1.mean, mu2.mean, g, e, e, norm["depth"])
    counts = np.array([r[1] for r in rows], dtype=float)
    se = counts.std(ddof=1) / np.sqrt(len(counts))
    z = (counts.mean() - exact) / se if se > 0 else 0.0
    status = 0 if abs(z) <= 4.0 else 2
    return status, {
        "expected_pairs": exact,
        "mc_mean": float(counts.mean()),
        "mc_se": float(se),
        "z": float(z),
    }


def _run_thin_sweep(cfg, seed, workers, out_dir):
    norm = _norm_pair_cfg(cfg)
    norm["p_grid"] = _grid(cfg, "p_grid", float)
    if any(not 0.0 <= p <= 1.0 for p in norm["p_grid"]):
        raise ConfigError("p_grid entries must lie in [0, 1]")
    replicates = _need(cfg, "replicates", int, 1, CAPS["replicates"])
    rows, extras = _run_sharded("thin-sweep", norm, seed, replicates, workers)
    violations = sum(extras)
    _write_csv(
        os.path.join(out_dir, "thin_sweep.csv"),
        ("p", "replicate", "intersection_size", "pair_count", "truncated"),
        rows,
    )
    return (0 if violations == 0 else 2), {"monotonicity_violations": violations}


def _run_ends(cfg, seed, workers, out_dir):
    g = _group_from(cfg)
    mu = _offspring_from(cfg, "offspring")
    if mu.mean <= 1.0:
        raise ConfigError("ends experiment needs offspring mean > 1")
    norm = {
        "group_spec": {"kind": g.kind, "param": g.param},
        "pmf": mu.pmf.tolist(),
        "depth": _need(cfg, "depth", int, 1, CAPS["depth"]),
        "radius_grid": _grid(cfg, "radius_grid", int),
        "m_threshold": _need(cfg, "m_threshold", int, 1),
        "budget": int(cfg.get("budget", 1_000_000)),
    }
    replicates = _need(cfg, "replicates", int, 1, CAPS["replicates"])
    rows, _ = _run_sharded("ends", norm, seed, replicates, workers)
    _write_csv(
        os.path.join(out_dir, "ends.csv"),
        ("radius", "replicate", "qualifying_components", "survived"),
        rows,
    )
    survivors = [r for r in rows if r[3]]
    by_radius = {}
    for radius, _, q, _ in survivors:
        by_radius.setdefault(radius, []).append(q)
    medians = {str(rad): float(np.median(v)) for rad, v in sorted(by_radius.items())}
    return 0, {"median_qualifying_by_radius": medians, "n_survivors": len(survivors) // max(len(by_radius), 1)}


_DRIVERS = {
    "spectra": _run_spectra,
    "visits": _run_visits,
    "magic-fuzz": _run_magic_fuzz,
    "mtp-test": _run_mtp_test,
    "intersect": _run_intersect,
    "thin-sweep": _run_thin_sweep,
    "ends": _run_ends,
}


def run(config: dict, out_dir: str, workers: int = 1, seed_override=None) -> int:
    """Execute one experiment config; returns the exit status."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    name = config.get("experiment")
    if name not in _DRIVERS:
        raise ConfigError(f"unknown experiment {name!r} (one of: {', '.join(EXPERIMENTS)})")
    seed = seed_override if seed_override is not None else config.get("seed")
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()
    status, extra = _DRIVERS[name](config, seed, workers, out_dir)
    manifest = {
        "experiment": name,
        "config": config,
        "seed": seed,
        "workers": workers,
        "version": __version__,
        "rng": _RNG_NOTE,
        "wall_time_s": time.time() - started,
        "status": status,
    }
    manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="brwlab", description="branching random walk experiment runner"
    )
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or config.get("out_dir")
    if not out_dir:
        print("error: no output directory (set out_dir in config or pass --out)", file=sys.stderr)
        return 1
    try:
        return run(config, out_dir, workers=args.workers, seed_override=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
