"""Episode-length statistics, solver evaluation, and comparison reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import EnvConfig, Variant
from .fp import run_fp
from .instance import MipInstance, load
from .policy import Policy, load_checkpoint
from .ppo import evaluate_policy

METRIC_COLUMNS = ["solver", "kind", "n", "m", "episodes", "EpLenMean", "EpLenStd",
                  "EpLenMax", "q90", "q10", "success_rate", "lp_solves_per_episode",
                  "instance_set", "config_hash", "seed"]
EPISODE_COLUMNS = ["index", "instance", "steps", "success", "lp_solves"]
SOLVER_COLUMNS = ("FP", "SFP-MLP", "SFP-CNN")


class BindingMismatch(ValueError):
    pass


@dataclass
class MetricsRow:
    solver: str
    episodes: int
    ep_len_mean: float
    ep_len_std: float
    ep_len_max: float
    q90: float
    q10: float
    success_rate: float
    lp_solves_per_episode: float
    wall_time_per_episode: float = 0.0


def summarize(steps, cap: int, solver: str = "", lp_solves=None, wall_time: float = 0.0) -> MetricsRow:
    """Statistics of capped step counts.

    Standard deviation is the population one; quantiles interpolate linearly
    between order statistics; an episode succeeds when its count is below
    ``cap``.
    """
    s = np.asarray(steps, dtype=float)
    if s.size == 0:
        raise ValueError("no episodes to summarize")
    s = np.minimum(s, cap)
    solves = np.asarray(lp_solves if lp_solves is not None else np.zeros(s.size), float)
    return MetricsRow(
        solver=solver, episodes=int(s.size),
        ep_len_mean=float(s.mean()), ep_len_std=float(s.std()), ep_len_max=float(s.max()),
        q90=float(np.quantile(s, 0.9)), q10=float(np.quantile(s, 0.1)),
        success_rate=float(np.mean(s < cap)),
        lp_solves_per_episode=float(solves.mean()),
        wall_time_per_episode=wall_time / s.size,
    )


def instance_set_hash(instances) -> str:
    h = hashlib.sha256()
    for inst in instances:
        h.update(inst.digest().encode())
    return h.hexdigest()[:16]


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def episode_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


@dataclass
class EvalResult:
    row: MetricsRow
    steps: list[int]
    lp_solves: list[int]
    instances: list[MipInstance]
    cap: int
    seed: int
    config: dict

    def metrics_record(self) -> dict:
        inst = self.instances[0]
        r = self.row
        return {
            "solver": r.solver, "kind": inst.kind.value, "n": inst.n, "m": inst.m,
            "episodes": r.episodes, "EpLenMean": r.ep_len_mean, "EpLenStd": r.ep_len_std,
            "EpLenMax": r.ep_len_max, "q90": r.q90, "q10": r.q10,
            "success_rate": r.success_rate, "lp_solves_per_episode": r.lp_solves_per_episode,
            "instance_set": instance_set_hash(self.instances),
            "config_hash": config_hash(self.config), "seed": self.seed,
        }


def evaluate_fp(instances, cap=100, seed=0, detect_revisits=True, traces=None) -> EvalResult:
    """Run classic FP once per instance with a per-instance derived seed."""
    instances = list(instances)
    if not instances:
        raise ValueError("empty instance set")
    steps, solves = [], []
    t0 = time.perf_counter()
    for i, inst in enumerate(instances):
        res = run_fp(inst, cap, episode_seed(seed, i), detect_revisits)
        steps.append(min(res.steps_taken, cap))
        solves.append(res.lp_solves)
        if traces is not None:
            traces.append(res)
    wall = time.perf_counter() - t0
    row = summarize(steps, cap, "FP", solves, wall)
    cfg = {"solver": "FP", "cap": cap, "detect_revisits": detect_revisits, "norm": "L1"}
    return EvalResult(row, steps, solves, instances, cap, seed, cfg)


def evaluate_checkpoint(path, instances, cap=100, seed=0, deterministic=False,
                        project_every_step: bool | None = None) -> EvalResult:
    """Evaluate a trained policy, one episode per instance."""
    instances = list(instances)
    if not instances:
        raise ValueError("empty instance set")
    policy, _, meta = load_checkpoint(path)
    bind = meta["binding"]
    for inst in instances:
        if (inst.n, inst.m) != (bind["n"], bind["m"]):
            raise BindingMismatch(
                f"checkpoint is bound to n={bind['n']}, m={bind['m']} but an instance has "
                f"n={inst.n}, m={inst.m}")
    env_kw = dict(meta.get("extra", {}).get("env", {}))
    env_kw.update(max_steps=cap, variant=bind["variant"])
    if project_every_step is not None:
        env_kw["project_every_step"] = project_every_step
    env_config = EnvConfig(**env_kw)
    return evaluate_with_policy(policy, instances, env_config, seed, deterministic)


def solver_label(policy: Policy, env_config: EnvConfig) -> str:
    label = "SFP-MLP" if policy.variant is Variant.MLP else "SFP-CNN"
    if policy.variant is Variant.MLP and not env_config.project_every_step:
        label += "-noproj"
    return label


def evaluate_with_policy(policy: Policy, instances, env_config: EnvConfig, seed=0,
                         deterministic=False) -> EvalResult:
    t0 = time.perf_counter()
    steps, solves = evaluate_policy(policy, instances, env_config, seed, deterministic)
    wall = time.perf_counter() - t0
    label = solver_label(policy, env_config)
    row = summarize(steps, env_config.max_steps, label, solves, wall)
    cfg = {"solver": label, "cap": env_config.max_steps, "deterministic": deterministic,
           "env": {"reward_norm": env_config.reward_norm.value,
                   "action_clip": env_config.action_clip,
                   "project_every_step": env_config.project_every_step}}
    return EvalResult(row, list(steps), list(solves), list(instances), env_config.max_steps,
                      seed, cfg)


# -- CSV I/O --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def csv_text(columns, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def write_eval(result: EvalResult, path) -> None:
    """Write the metrics row and the per-episode table next to each other.

    ``path`` gets the metrics CSV; ``<stem>.episodes.csv`` holds one row per
    episode.  Wall-clock time goes to ``<stem>.timing.json`` so the CSVs are
    reproducible byte for byte.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(METRIC_COLUMNS, [result.metrics_record()]))
    episodes = [
        {"index": i, "instance": inst.digest(), "steps": s, "success": int(s < result.cap),
         "lp_solves": lp}
        for i, (inst, s, lp) in enumerate(zip(result.instances, result.steps, result.lp_solves))
    ]
    path.with_suffix(".episodes.csv").write_text(csv_text(EPISODE_COLUMNS, episodes))
    path.with_suffix(".timing.json").write_text(json.dumps(
        {"wall_time_per_episode": result.row.wall_time_per_episode}))


def read_metrics(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != 1:
        raise ValueError(f"{path}: expected a single metrics row")
    return rows[0]


def load_instance_dir(path) -> list[MipInstance]:
    path = Path(path)
    if path.is_file():
        return [load(path)]
    files = sorted(path.glob("*.mip"))
    if not files:
        raise FileNotFoundError(f"no .mip files in {path}")
    return [load(f) for f in files]


# -- comparison report ------------------------------------------------------------

REPORT_ROWS = [("EpLenMean", "EpLenMean"), ("EpLenStd", "EpLenStd"), ("EpLenMax", "EpLenMax"),
               ("90 Quant", "q90"), ("10 Quant", "q10"), ("Success", "success_rate")]


class MixedInstanceSets(ValueError):
    pass


def compare(run_dir) -> dict[tuple[str, int, int], dict[str, dict | None]]:
    """Group stored metrics by (kind, n, m) with one column per solver.

    Missing solvers are reported as ``None``; columns evaluated on different
    instance sets are rejected.
    """
    run_dir = Path(run_dir)
    cells: dict[tuple[str, int, int], dict[str, dict | None]] = {}
    for f in sorted((run_dir / "logs").glob("eval_*.csv")):
        if f.name.endswith(".episodes.csv"):
            continue
        rec = read_metrics(f)
        key = (rec["kind"], int(rec["n"]), int(rec["m"]))
        cell = cells.setdefault(key, {})
        if rec["solver"] in cell:
            raise ValueError(f"duplicate {rec['solver']} results for {key}")
        cell[rec["solver"]] = rec
    for key, cell in cells.items():
        sets = {rec["instance_set"] for rec in cell.values()}
        if len(sets) > 1:
            raise MixedInstanceSets(f"solvers for {key} were evaluated on different instance sets")
        for col in SOLVER_COLUMNS:
            cell.setdefault(col, None)
    return dict(sorted(cells.items()))


def _solver_order(cell):
    extra = sorted(k for k in cell if k not in SOLVER_COLUMNS)
    return list(SOLVER_COLUMNS) + extra


def render_text(key, cell) -> str:
    kind, n, m = key
    cols = _solver_order(cell)
    width = max(10, *(len(c) + 2 for c in cols))
    lines = [f"Comparison ({kind}, n = {n}, m = {m})",
             "".ljust(12) + "".join(c.rjust(width) for c in cols)]
    for label, field in REPORT_ROWS:
        vals = []
        for c in cols:
            rec = cell[c]
            vals.append("absent" if rec is None else f"{float(rec[field]):.1f}" if field != "success_rate"
                        else f"{float(rec[field]):.2f}")
        lines.append(label.ljust(12) + "".join(v.rjust(width) for v in vals))
    present = [cell[c] for c in cols if cell[c] is not None]
    if present:
        lines.append(f"instance set {present[0]['instance_set']}; "
                     + "; ".join(f"{c}: config {cell[c]['config_hash']} seed {cell[c]['seed']}"
                                 for c in cols if cell[c] is not None))
    return "\n".join(lines) + "\n"


def render_csv(key, cell) -> str:
    cols = _solver_order(cell)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric"] + cols)
    for label, field in REPORT_ROWS:
        w.writerow([label] + ["absent" if cell[c] is None else cell[c][field] for c in cols])
    w.writerow(["instance_set"] + ["" if cell[c] is None else cell[c]["instance_set"] for c in cols])
    w.writerow(["config_hash"] + ["" if cell[c] is None else cell[c]["config_hash"] for c in cols])
    w.writerow(["seed"] + ["" if cell[c] is None else cell[c]["seed"] for c in cols])
    return buf.getvalue()


def write_reports(run_dir) -> list[Path]:
    run_dir = Path(run_dir)
    out_dir = run_dir / "reports"
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for key, cell in compare(run_dir).items():
        stem = f"compare_{key[0]}_{key[1]}x{key[2]}"
        (out_dir / f"{stem}.txt").write_text(render_text(key, cell))
        (out_dir / f"{stem}.csv").write_text(render_csv(key, cell))
        written += [out_dir / f"{stem}.txt", out_dir / f"{stem}.csv"]
    return written
