"""Command line interface.

Subcommands
-----------
search     dynamic-program search for GHZ protocols, resumable from its buffer snapshot
superop    stabilizer-measurement superoperators for every swept error probability
threshold  toric-code memory runs over the (p, L) grid, threshold fit and plot
fit        threshold fit of an existing success-count table
sweep      superop followed by threshold

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fitstats
from .config import ConfigError, RunConfig, load_config
from .noise import Hardware
from .protocols import builtin_tree, recipe_for, recipe_from_text
from .protocols.recipe import ProtocolRecipe
from .protocols.search import SearchConfig, cells, dynamic_search, restore, snapshot
from .superop import (
    accumulate, convergence_curve, default_cadence, ghz_cycle_time, read_superoperators,
    superoperators_from, write_superoperators,
)
from .toric import PLAQUETTE, STAR, count_successes, identity_superoperators, phenomenological_superoperators

log = logging.getLogger("distoric")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
TABLE_COLUMNS = ("p", "L", "shots", "successes", "seed", "superop_Z", "superop_X")


# ---------------------------------------------------------------------------
# helpers


def derive_seed(*parts) -> int:
    """63-bit seed from a deterministic hash of ``parts``."""
    text = ":".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


def cache_key(recipe: ProtocolRecipe, hw: Hardware, t_ghz, stype: str, shots: int, seed: int) -> str:
    """Content hash identifying one superoperator computation."""
    payload = json.dumps({"recipe": recipe.to_text(), "hardware": hw.fingerprint(), "t_ghz": repr(t_ghz),
                          "stabilizer_type": stype, "shots": shots, "seed": seed}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def shards(total: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous ``(start, stop)`` shot ranges, one per worker."""
    bounds = np.linspace(0, total, min(workers, total) + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map(fn, jobs, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def protocol_recipe(cfg: RunConfig) -> ProtocolRecipe:
    src = cfg.protocol
    if src.kind == "builtin":
        return recipe_for(builtin_tree(src.value), src.value)
    if src.kind == "recipe":
        return recipe_from_text(Path(src.value).read_text())
    path = cfg.output_dir / "search" / "best.recipe"
    if not path.is_file():
        raise RuntimeError(f"{path} not found; run the search subcommand first")
    return recipe_from_text(path.read_text())


def resolve_t_ghz(cfg: RunConfig, recipe: ProtocolRecipe, p: float):
    g = cfg.ghz
    if g.mode == "none":
        return None
    if g.mode == "explicit":
        return g.t_ghz
    estimate = g.p_th_estimate if g.p_th_estimate is not None else p
    rng = np.random.default_rng(derive_seed(cfg.seed, "t_ghz", recipe.digest(), estimate))
    return ghz_cycle_time(recipe, cfg.hardware.base, estimate, g.probe_shots, rng)


# ---------------------------------------------------------------------------
# search


def _search_settings(cfg: RunConfig) -> dict:
    s = cfg.search
    return {"n_max": s.n_max, "k_max": s.k_max, "n_buffer": s.n_buffer, "shots": s.shots,
            "stabilizer_type": s.stabilizer_type, "max_slots": s.max_slots, "t_ghz": repr(s.t_ghz),
            "seed": cfg.seed, "hardware": cfg.hardware.at(s.p).fingerprint()}


def cmd_search(cfg: RunConfig) -> int:
    s = cfg.search
    try:
        config = SearchConfig(s.n_max, s.k_max, cfg.hardware.at(s.p), n_buffer=s.n_buffer, shots=s.shots,
                              seed=cfg.seed, t_ghz=s.t_ghz, max_slots=s.max_slots,
                              stabilizer_type=s.stabilizer_type, workers=cfg.workers)
    except ValueError as exc:
        raise ConfigError(f"[search] {exc}") from None
    out = cfg.output_dir / "search"
    out.mkdir(parents=True, exist_ok=True)
    snap_path = out / "buffer.json"
    settings = _search_settings(cfg)
    resume = None
    if snap_path.is_file():
        saved = json.loads(snap_path.read_text())
        if saved.get("settings") == settings:
            resume = restore(saved["buffer"], s.max_slots)
            log.info("resuming search with %d filled cells", len(resume))
        else:
            log.warning("ignoring %s: written with different settings", snap_path)

    def save(result):
        tmp = snap_path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"settings": settings, "buffer": snapshot(result)}, indent=1))
        tmp.replace(snap_path)

    total = len(cells(s.n_max, s.k_max))
    result = dynamic_search(config, progress=lambda n, k, m: log.info("cell (n=%d, k=%d) of %d: %d candidates",
                                                                      n, k, total, m),
                            resume=resume, on_cell=save)
    save(result)
    final = result.final()
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("rank", "n", "k", "q", "score", "tree"))
        for i, c in enumerate(final, 1):
            w.writerow((i, c.n, c.k, c.q, repr(c.score), c.recipe.name))
    for i, c in enumerate(final[:s.top], 1):
        (out / f"rank{i}_k{c.k}.recipe").write_text(c.recipe.to_text())
    if not final:
        raise RuntimeError("search produced no protocol of the final weight")
    (out / "best.recipe").write_text(final[0].recipe.to_text())
    for i, c in enumerate(final[:s.top], 1):
        print(f"{i:2d}  k={c.k:2d}  q={c.q}  score={c.score:.6f}  {c.recipe.name}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# superoperators


def _accumulate_job(args):
    recipe, hw, t_ghz, stype, seed, start, stop, cadence = args
    return accumulate(recipe, hw, t_ghz, stype, seed, start, stop, cadence)


def superop_files(cfg: RunConfig, recipe: ProtocolRecipe, p: float, compute: bool) -> dict:
    """Cache paths of both stabilizer types at error probability ``p``, computed on demand."""
    hw = cfg.hardware.at(p)
    t_ghz = resolve_t_ghz(cfg, recipe, p)
    shots = cfg.superop_shots
    cadence = cfg.superop_cadence or default_cadence(shots)
    out = {}
    for stype in (PLAQUETTE, STAR):
        key = cache_key(recipe, hw, t_ghz, stype, shots, cfg.seed)
        path = cfg.cache_dir / f"{key}.superop"
        out[stype] = (key, path)
        if path.is_file():
            log.info("p=%g %s: cached %s", p, stype, path.name)
            continue
        if not compute:
            raise RuntimeError(f"superoperator cache {path} missing for p={p}; run the superop subcommand first")
        cfg.cache_dir.mkdir(parents=True, exist_ok=True)
        log.info("p=%g %s: %d shots", p, stype, shots)
        jobs = [(recipe, hw, t_ghz, stype, cfg.seed, a, b, cadence) for a, b in shards(shots, cfg.workers)]
        parts = _map(_accumulate_job, jobs, cfg.workers)
        acc = parts[0]
        for part in parts[1:]:
            acc = acc.merge(part)
        if not acc.n_success:
            raise RuntimeError(f"no GHZ state completed within t_ghz={t_ghz} at p={p}")
        success, fail = superoperators_from(acc, hw, t_ghz, stype, tuple(sorted(recipe.nodes)))
        meta = {"key": key, "recipe": recipe.digest(), "hardware": hw.fingerprint(), "p": repr(p),
                "t_ghz": repr(t_ghz), "shots": shots, "seed": cfg.seed}
        tmp = path.with_suffix(".tmp")
        write_superoperators(tmp, success, fail, meta)
        tmp.replace(path)
        with open(cfg.cache_dir / f"{key}.convergence.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("shots", "trace_distance"))
            w.writerows((n, repr(d)) for n, d in convergence_curve(acc))
    return out


def _require_sweep(cfg: RunConfig):
    if cfg.sweep is None:
        raise ConfigError("a [sweep] section is required")
    return cfg.sweep


def cmd_superop(cfg: RunConfig) -> int:
    sweep = _require_sweep(cfg)
    if sweep.model != "protocol":
        log.info("model %s needs no protocol superoperators", sweep.model)
        return EXIT_OK
    recipe = protocol_recipe(cfg)
    for p in sweep.p:
        for stype, (key, path) in superop_files(cfg, recipe, p, compute=True).items():
            success, _, _ = read_superoperators(path)
            print(f"p={p:<10g} {stype}: stabilizer fidelity {success.stabilizer_fidelity:.6f}, "
                  f"p_ghz {success.p_ghz:.4f}  [{key}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# threshold runs


def _count_job(args):
    L, superops, p_ghz, shots, seed, n_cycles, order, start = args
    return count_successes(L, superops, p_ghz, shots, seed, n_cycles, order, start)


def channel_for(cfg: RunConfig, recipe, p: float) -> tuple[dict, dict, dict]:
    """Superoperators, completion probabilities and cache keys at error probability ``p``."""
    model = cfg.sweep.model
    if model == "identity":
        return identity_superoperators(), {PLAQUETTE: 1.0, STAR: 1.0}, {PLAQUETTE: "-", STAR: "-"}
    if model == "phenomenological":
        return phenomenological_superoperators(p), {PLAQUETTE: 1.0, STAR: 1.0}, {PLAQUETTE: "-", STAR: "-"}
    files = superop_files(cfg, recipe, p, compute=False)
    superops, p_ghz, keys = {}, {}, {}
    for stype, (key, path) in files.items():
        success, fail, _ = read_superoperators(path)
        superops[stype, "success"], superops[stype, "fail"] = success, fail
        p_ghz[stype] = success.p_ghz
        keys[stype] = key
    return superops, p_ghz, keys


def read_table(path: Path) -> dict:
    if not path.is_file():
        return {}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {(r["p"], r["L"], r["shots"], r["seed"], r["superop_Z"], r["superop_X"]): r for r in rows}


def run_grid(cfg: RunConfig) -> Path:
    """Fill the success-count table, reusing rows already present for identical inputs."""
    sweep = _require_sweep(cfg)
    recipe = protocol_recipe(cfg) if sweep.model == "protocol" else None
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "threshold.csv"
    done = read_table(path)
    rows = []
    for p in sweep.p:
        superops, p_ghz, keys = channel_for(cfg, recipe, p)
        for L in sweep.L:
            seed = derive_seed(cfg.seed, sweep.model, p, L)
            ident = (repr(p), str(L), str(sweep.shots), str(seed), keys[PLAQUETTE], keys[STAR])
            if ident in done:
                rows.append(done[ident])
                continue
            jobs = [(L, superops, p_ghz, b - a, seed, sweep.n_cycles, sweep.order, a)
                    for a, b in shards(sweep.shots, cfg.workers)]
            ok = sum(_map(_count_job, jobs, cfg.workers))
            log.info("p=%g L=%d: %d / %d", p, L, ok, sweep.shots)
            rows.append(dict(zip(TABLE_COLUMNS, ident[:3] + (str(ok),) + ident[3:])))
            _write_table(path, rows)
    _write_table(path, rows)
    return path


def _write_table(path: Path, rows: list) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    tmp.replace(path)


def plot_threshold(path: Path, data, fit: fitstats.FitResult | None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for L in sorted({d.L for d in data}):
        pts = sorted((d for d in data if d.L == L), key=lambda d: d.p)
        ps = np.array([d.p for d in pts])
        line = ax.errorbar(ps, [d.r for d in pts], yerr=[d.sigma for d in pts], fmt="o", ms=4, capsize=2,
                           label=f"L = {L}")
        if fit is not None:
            grid = np.linspace(ps.min(), ps.max(), 200)
            ax.plot(grid, fitstats.model(fit.beta, grid, np.full_like(grid, L)), color=line[0].get_color(), lw=1)
    if fit is not None:
        lo, hi = fit.p_th_ci
        ax.axvspan(lo, hi, color="0.85", zorder=0)
        ax.axvline(fit.p_th, color="0.4", ls="--", lw=1, label=f"p_th = {fit.p_th:.4g}")
    ax.set_xlabel("error probability p")
    ax.set_ylabel("success rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fit_and_report(table: Path, cfg_fit, out_dir: Path) -> fitstats.FitResult:
    data = cfg_fit.select(fitstats.read_data(table))
    if not data:
        raise fitstats.FitError("no data points inside the fit window")
    try:
        fitstats.check_crossing(data)
        fit = fitstats.fit_threshold(data, level=cfg_fit.level)
    except fitstats.FitError:
        plot_threshold(out_dir / "threshold.png", data, None)
        raise
    fitstats.write_report(out_dir / "threshold_fit.csv", fit, data)
    plot_threshold(out_dir / "threshold.png", data, fit)
    print(fitstats.format_report(fit))
    return fit


def cmd_threshold(cfg: RunConfig) -> int:
    table = run_grid(cfg)
    fit_and_report(table, cfg.fit, cfg.output_dir)
    return EXIT_OK


def cmd_fit(cfg: RunConfig, table: Path | None = None) -> int:
    table = table or cfg.output_dir / "threshold.csv"
    if not table.is_file():
        raise ConfigError(f"data table {table} does not exist")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    fit_and_report(table, cfg.fit, cfg.output_dir)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    cmd_superop(cfg)
    return cmd_threshold(cfg)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="run configuration (INI)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--workers", type=int, help="override [run] workers")
    common.add_argument("--cache-dir", type=Path, help="override [run] cache_dir")
    common.add_argument("--output-dir", type=Path, help="override [run] output_dir")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    parser = argparse.ArgumentParser(prog="distoric", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("search", parents=[common], help="search GHZ protocols")
    sub.add_parser("superop", parents=[common], help="compute stabilizer superoperators")
    sub.add_parser("threshold", parents=[common], help="toric-code runs and threshold fit")
    fit = sub.add_parser("fit", parents=[common], help="fit an existing success-count table")
    fit.add_argument("--data", type=Path, help="table with p, L, successes, shots columns")
    sub.add_parser("sweep", parents=[common], help="superop followed by threshold")
    return parser


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        kw["workers"] = args.workers
    if args.cache_dir is not None:
        kw["cache_dir"] = args.cache_dir.resolve()
    if args.output_dir is not None:
        kw["output_dir"] = args.output_dir.resolve()
    return replace(cfg, **kw)


COMMANDS = {"search": cmd_search, "superop": cmd_superop, "threshold": cmd_threshold, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "fit":
            return cmd_fit(cfg, args.data)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
