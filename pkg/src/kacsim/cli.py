"""Scenario runner: ``kacsim <command> --config scenario.yaml``.

Exit codes: 0 ok, 2 configuration error, 3 hypothesis failure,
4 numeric or convergence failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from . import __version__, fixedpoint, kernel, metrics, montecarlo, trees, wild
from .errors import (ClassificationError, CostLimitError, DomainError, InsufficientDataError,
                     KacsimError, KernelSpecError, UnsupportedError)
from .initial_data import classify, law_from_dict, law_label, law_to_dict
from .rng import stream

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = ("validate", "spectral", "simulate", "selfsimilar", "degenerate",
            "wild-compare", "rate", "tree-stats")


class ConfigError(KacsimError, ValueError):
    pass


class HypothesisFailure(KacsimError):
    pass


class NumericFailure(KacsimError):
    pass


@dataclass
class Scenario:
    kernel: kernel.KernelSpec
    initial: object = None
    gamma: float | None = None
    times: list = field(default_factory=lambda: [0.0])
    counts: list = field(default_factory=lambda: [10_000])
    delta: float | None = None
    seed: int = 0
    output: Path = Path("kacsim-out")
    workers: int = 1
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def count_at(self, i: int) -> int:
        return self.counts[i] if len(self.counts) > 1 else self.counts[0]


def read_config(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping")
    return data


def scenario_from_dict(d: dict, overrides: dict | None = None) -> Scenario:
    d = {**d, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    if "kernel" not in d:
        raise ConfigError("config needs a 'kernel' entry")
    spec = kernel.kernel_from_dict(d["kernel"])
    law = law_from_dict(d["initial"]) if "initial" in d else None
    times = [float(t) for t in np.atleast_1d(d.get("times", [0.0]))]
    if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError(f"times must be nonnegative and strictly increasing: {times}")
    counts = [int(c) for c in np.atleast_1d(d.get("counts", [10_000]))]
    if any(c < 1 for c in counts) or len(counts) not in (1, len(times)):
        raise ConfigError("counts must be >= 1, one value or one per time")
    gamma = d.get("gamma")
    delta = d.get("delta")
    known = {"kernel", "initial", "gamma", "times", "counts", "delta", "seed", "output", "workers"}
    return Scenario(spec, law, None if gamma is None else float(gamma), times, counts,
                    None if delta is None else float(delta), int(d.get("seed", 0)),
                    Path(d.get("output", "kacsim-out")), int(d.get("workers", 1)),
                    {k: v for k, v in d.items() if k not in known}, d)


def _canonical(sc: Scenario) -> dict:
    out = {"kernel": kernel.kernel_to_dict(sc.kernel), "gamma": sc.gamma, "times": sc.times,
           "counts": sc.counts, "delta": sc.delta, "seed": sc.seed, "options": sc.options}
    if sc.initial is not None:
        out["initial"] = law_to_dict(sc.initial)
    return out


class Run:
    """Collects output files and writes the manifest that lists them."""

    def __init__(self, command: str, sc: Scenario):
        self.command = command
        self.sc = sc
        self.dir = sc.output
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.summary: dict = {}

    def path(self, name: str) -> Path:
        return self.dir / name

    def add(self, *paths):
        self.files.extend(Path(p) for p in paths)

    def write_csv(self, name, header, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([_cell(x) for x in row] for row in rows)
        self.add(p)
        return p

    def write_json(self, name, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
        self.add(p)
        return p

    def finish(self, status: int) -> int:
        canon = _canonical(self.sc)
        digest = hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()
        manifest = {
            "command": self.command,
            "seed": self.sc.seed,
            "config": canon,
            "config_sha256": digest,
            "exit_status": status,
            "summary": self.summary,
            "versions": _versions(),
            "outputs": [{"file": f.name, "sha256": hashlib.sha256(f.read_bytes()).hexdigest()}
                        for f in self.files],
        }
        (self.dir / f"manifest-{self.command}.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
        return status


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (np.ndarray, tuple)):
        return list(o)
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _versions() -> dict:
    out = {"python": platform.python_version(), "kacsim": __version__}
    for pkg in ("numpy", "scipy", "numba", "pyyaml"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _need(sc: Scenario, *names):
    missing = [n for n in names if getattr(sc, n) is None]
    if missing:
        raise ConfigError(f"this command needs {', '.join(missing)} in the config")


# -- commands ----------------------------------------------------------------------

def cmd_validate(run: Run) -> int:
    report = kernel.validate_kernel(run.sc.kernel)
    run.write_json("validation.json", report.to_dict())
    run.summary = {"passed": report.passed, "failed": report.failed()}
    for c in report.conditions:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def cmd_spectral(run: Run) -> int:
    sc = run.sc
    grid = np.asarray(sc.options.get("s_grid", np.linspace(0.0, 4.0, 41)), dtype=float)
    S = np.asarray(kernel.spectral_S(sc.kernel, grid), dtype=float)
    mu = np.asarray(kernel.spectral_mu(sc.kernel, grid), dtype=float)
    run.write_csv("spectral.csv", ["s", "S", "mu"], zip(grid.tolist(), S.tolist(), mu.tolist()))
    if sc.gamma is not None:
        prof = kernel.spectral_profile(sc.kernel, sc.gamma, s_max=float(sc.options.get("s_max", 64)))
        run.summary = {"gamma": sc.gamma, "S": _finite(prof.S), "mu": _finite(prof.mu),
                       "q_star": _finite(prof.q_star), "note": prof.note}
        run.write_json("spectral.json", run.summary)
    return EXIT_OK


def _check_hypotheses(sc: Scenario):
    report = kernel.validate_kernel(sc.kernel)
    if not report.passed:
        raise HypothesisFailure("kernel fails " + ", ".join(report.failed()))


def cmd_simulate(run: Run) -> int:
    sc = run.sc
    _need(sc, "initial")
    rows = []
    for i, t in enumerate(sc.times):
        b = montecarlo.sample_batch(sc.seed + i, sc.kernel, sc.initial, t, sc.gamma,
                                    sc.count_at(i), sc.workers)
        run.add(*montecarlo.save_batch(b, run.path(f"samples_t{i}.csv")))
        v = b.values
        rows.append([t, len(b), float(v.mean()), float(v.var()), float(np.median(v))])
    run.write_csv("simulate.csv", ["t", "count", "mean", "variance", "median"], rows)
    return EXIT_OK


def _mixing(run: Run, seed_offset: int):
    sc = run.sc
    opts = sc.options.get("mixing", {})
    mix = fixedpoint.solve_mixing(stream(sc.seed, 10_000 + seed_offset), sc.kernel, sc.gamma,
                                  int(opts.get("pop_size", 100_000)),
                                  int(opts.get("max_sweeps", 200)), float(opts.get("tol", 1e-3)))
    run.add(*fixedpoint.save_mixing(mix, run.path("mixing.csv")))
    if not mix.converged:
        raise NumericFailure(f"mixing law did not converge in {mix.sweeps_run} sweeps "
                             f"(last distance {mix.final_distance:.3g})")
    return mix


def cmd_selfsimilar(run: Run) -> int:
    sc = run.sc
    _need(sc, "initial", "gamma")
    _check_hypotheses(sc)
    profile = classify(sc.initial, sc.gamma)
    mix = _mixing(run, 0)
    vinf = montecarlo.sample_limit_batch(sc.seed + 50_000, mix, profile, max(sc.counts),
                                         law_label(sc.initial))
    run.add(*montecarlo.save_batch(vinf, run.path("vinf.csv")))
    xi = np.asarray(sc.options.get("xi", [0.25, 0.5, 1.0, 2.0]), dtype=float)
    cf_inf = metrics.empirical_cf(vinf, xi)
    rows = []
    for i, t in enumerate(sc.times):
        b = montecarlo.sample_batch(sc.seed + i, sc.kernel, sc.initial, t, sc.gamma,
                                    sc.count_at(i), sc.workers)
        run.add(*montecarlo.save_batch(b, run.path(f"samples_t{i}.csv")))
        cf_t = metrics.empirical_cf(b, xi)
        rows.append([t, metrics.ks_two_sample(b, vinf), float(np.max(np.abs(cf_t - cf_inf)))])
    run.write_csv("selfsimilar.csv", ["t", "ks_vs_limit", "max_cf_gap"], rows)
    run.summary = {"case": profile.case, "k0": profile.k0, "eta0": profile.eta0,
                   "mixing_sweeps": mix.sweeps_run, "final_ks": rows[-1][1]}
    return EXIT_OK


def cmd_degenerate(run: Run) -> int:
    sc = run.sc
    _need(sc, "initial", "gamma", "delta")
    _check_hypotheses(sc)
    mu_g, mu_d = (float(kernel.spectral_mu(sc.kernel, s)) for s in (sc.gamma, sc.delta))
    if not (sc.delta < sc.gamma and mu_d < mu_g):
        raise HypothesisFailure(f"need delta < gamma and mu(delta) < mu(gamma); got "
                                f"mu({sc.delta}) = {mu_d:.6g}, mu({sc.gamma}) = {mu_g:.6g}")
    eps = float(sc.options.get("threshold", 0.05))
    rows = []
    for i, t in enumerate(sc.times):
        b = montecarlo.sample_batch(sc.seed + i, sc.kernel, sc.initial, t, sc.gamma,
                                    sc.count_at(i), sc.workers)
        run.add(*montecarlo.save_batch(b, run.path(f"samples_t{i}.csv")))
        a = np.abs(b.values)
        rows.append([t, float(np.mean(a > eps)), float(np.median(a))])
    run.write_csv("degenerate.csv", ["t", "fraction_above", "median_abs"], rows)
    run.summary = {"threshold": eps, "mu_gamma": mu_g, "mu_delta": mu_d,
                   "final_fraction": rows[-1][1]}
    return EXIT_OK


def cmd_wild_compare(run: Run) -> int:
    sc = run.sc
    _need(sc, "initial")
    opts = sc.options.get("wild", {})
    K = int(opts.get("K", 12))
    xi = np.asarray(opts.get("xi", [0.5, 1.0, 2.0]), dtype=float)
    rows = []
    worst = -math.inf
    for i, t in enumerate(sc.times):
        evals = wild.wild_grid(sc.kernel, sc.initial, t, xi, K)
        b = montecarlo.sample_batch(sc.seed + i, sc.kernel, sc.initial, t, None,
                                    sc.count_at(i), sc.workers)
        ecf = metrics.empirical_cf(b, xi)
        allowed_noise = 5.0 / math.sqrt(len(b))
        for ev, e in zip(evals, ecf):
            gap = abs(ev.value - e)
            allowed = ev.tail_bound + allowed_noise
            worst = max(worst, gap - allowed)
            rows.append([t, ev.xi, ev.value.real, ev.value.imag, ev.tail_bound,
                         e.real, e.imag, gap, allowed])
    run.write_csv("wild_compare.csv", ["t", "xi", "re", "im", "tail_bound", "mc_re", "mc_im",
                                       "abs_gap", "allowed"], rows)
    run.summary = {"K": K, "all_within_bound": worst <= 0}
    return EXIT_OK if worst <= 0 else EXIT_NUMERIC


def cmd_rate(run: Run) -> int:
    sc = run.sc
    _need(sc, "initial", "gamma", "delta")
    _check_hypotheses(sc)
    profile = classify(sc.initial, sc.gamma)
    mix = _mixing(run, 0)
    n_inf = max(sc.counts)
    vinf = montecarlo.sample_limit_batch(sc.seed + 50_000, mix, profile, n_inf)
    vinf2 = montecarlo.sample_limit_batch(sc.seed + 50_001, mix, profile, n_inf)
    run.add(*montecarlo.save_batch(vinf, run.path("vinf.csv")))
    power = max(sc.delta, 1.0)
    baseline = metrics.wasserstein_distance(vinf, vinf2, sc.delta) ** power
    points = []
    for i, t in enumerate(sc.times):
        b = montecarlo.sample_batch(sc.seed + i, sc.kernel, sc.initial, t, sc.gamma,
                                    sc.count_at(i), sc.workers)
        points.append((t, metrics.wasserstein_distance(b, vinf, sc.delta) ** power))
    fit = metrics.fit_decay_rate(points, sc.kernel, sc.gamma, sc.delta, floor=3 * baseline)
    run.add(metrics.save_rate_fit(fit, run.path("rate.json"), run.path("rate.csv")),
            run.path("rate.csv"))
    run.summary = {"slope": fit.slope, "predicted_slope": fit.predicted_slope,
                   "r_squared": fit.r_squared, "baseline": baseline}
    return EXIT_OK


def cmd_tree_stats(run: Run) -> int:
    sc = run.sc
    opts = sc.options.get("trees", {})
    n = sc.kernel.n_children
    count = int(opts.get("count", sc.counts[0]))
    rng = stream(sc.seed, 0)
    rows = []
    for k in range(1, int(opts.get("max_size", 4)) + 1):
        sizes = trees.grow_shapes(rng, n, k, count)
        for prof in trees.shape_profiles(n, k):
            p = float(trees.shape_probability(n, prof))
            freq = float(np.mean(np.all(sizes == np.asarray(prof), axis=1)))
            se = math.sqrt(p * (1 - p) / count)
            rows.append([k, "-".join(map(str, prof)), p, freq, se])
    run.write_csv("shape_law.csv", ["size", "profile", "probability", "frequency", "std_error"],
                  rows)
    d_size = int(opts.get("dirichlet_size", 1000))
    d_count = int(opts.get("dirichlet_count", 1000))
    frac = trees.subtree_fraction_sample(stream(sc.seed, 1), n, d_size, d_count)
    ks = metrics.ks_distance(frac[:, 0], trees.dirichlet_marginal_cdf(n))
    summary = {"dirichlet_ks": ks, "dirichlet_size": d_size}
    if sc.gamma is not None:
        stat_rows = []
        for j, size in enumerate(opts.get("stats_sizes", [5, 20, 100])):
            batch = trees.grow_trees(stream(sc.seed, 2 + j), sc.kernel, int(size), count)
            st = trees.batch_weight_stats(batch, sc.gamma, sc.kernel)
            for r in range(len(batch)):
                stat_rows.append([int(size), float(st["M"][r]), float(st["M_tilde"][r]),
                                  float(st["beta_max"][r]),
                                  *batch.subtree_sizes[r].tolist()])
        run.write_csv("tree_stats.csv", ["size", "M", "M_tilde", "beta_max",
                                         *[f"i_{j + 1}" for j in range(n)]], stat_rows)
    run.summary = summary
    run.write_json("tree_stats.json", summary)
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate, "spectral": cmd_spectral, "simulate": cmd_simulate,
    "selfsimilar": cmd_selfsimilar, "degenerate": cmd_degenerate,
    "wild-compare": cmd_wild_compare, "rate": cmd_rate, "tree-stats": cmd_tree_stats,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kacsim", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", "-c", required=True, help="YAML or JSON scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--counts", type=int, nargs="+", help="override sample sizes")
    p.add_argument("--output", "-o", help="output directory")
    p.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = scenario_from_dict(read_config(args.config),
                                {"seed": args.seed, "counts": args.counts,
                                 "output": args.output, "workers": args.workers})
    except (ConfigError, KernelSpecError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, sc)
    try:
        status = HANDLERS[args.command](run)
    except (ConfigError, KernelSpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return run.finish(EXIT_CONFIG)
    except (HypothesisFailure, ClassificationError) as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return run.finish(EXIT_HYPOTHESIS)
    except (NumericFailure, DomainError, CostLimitError, InsufficientDataError,
            UnsupportedError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return run.finish(EXIT_NUMERIC)
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
