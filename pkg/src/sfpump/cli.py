"""Command-line interface: ``sfpump {gen,fp,train,eval,compare,selftest}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import harness
from .config import ConfigError, RunConfig, load_config
from .env import EnvConfig, Variant
from .fp import write_trace
from .instance import InstanceFormatError, Kind, generate, save
from .lp import LpError
from .nn import NonFiniteActivation
from .policy import CheckpointError, save_checkpoint
from .ppo import TRAIN_LOG_COLUMNS, NonFiniteLoss, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("sfpump")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_size(text: str) -> tuple[int, int]:
    try:
        n, m = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 5x6, got '{text}'") from None
    if n < 1 or m < 1:
        raise argparse.ArgumentTypeError("size entries must be positive")
    return n, m


def instance_seed(base: int, kind: Kind, n: int, m: int, index: int) -> int:
    kind_code = 0 if kind is Kind.IP else 1
    ss = np.random.SeedSequence(base, spawn_key=(n, m, kind_code, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_pool(base_seed: int, kind: Kind, n: int, m: int, count: int, offset: int = 0):
    return [generate(instance_seed(base_seed, kind, n, m, offset + i), n, m, kind)
            for i in range(count)]


def write_pool(instances, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, inst in enumerate(instances):
        save(inst, directory / f"inst_{i:05d}.mip")
    manifest = {"count": len(instances), "instance_set": harness.instance_set_hash(instances),
                "seeds": [inst.seed for inst in instances]}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


# -- subcommands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    kind = Kind(args.kind)
    out = Path(args.out)
    sizes = args.size or [(5, 6)]
    for n, m in sizes:
        pool = make_pool(args.seed, kind, n, m, args.count)
        target = out if len(sizes) == 1 and not args.nested else out / f"{kind.value}_{n}x{m}"
        write_pool(pool, target)
        print(f"wrote {len(pool)} {kind.value} instances ({n}x{m}) to {target}")
    return EXIT_OK


def cmd_fp(args) -> int:
    instances = harness.load_instance_dir(args.instances)
    traces = [] if args.trace else None
    result = harness.evaluate_fp(instances, args.cap, args.seed, not args.no_revisits, traces)
    if args.trace:
        path = Path(args.trace)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for inst, res in zip(instances, traces):
                fh.write(json.dumps({"instance": inst.digest(), "steps": res.steps_taken,
                                     "terminated_by": res.terminated_by.value}) + "\n")
                write_trace(res, fh)
    if args.out:
        harness.write_eval(result, args.out)
    _print_row(result.row)
    return EXIT_OK


def _print_row(row):
    print(f"{row.solver}: episodes={row.episodes} EpLenMean={row.ep_len_mean:.2f} "
          f"EpLenStd={row.ep_len_std:.2f} EpLenMax={row.ep_len_max:.0f} q90={row.q90:.1f} "
          f"q10={row.q10:.1f} success={row.success_rate:.2f} "
          f"lp/episode={row.lp_solves_per_episode:.1f}")


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.iterations is not None:
        cfg.train.iterations = args.iterations
    variant = Variant(args.variant)
    kind = Kind(args.kind)
    n, m = args.size
    run = Path(args.out)
    if args.train_dir:
        train_pool = harness.load_instance_dir(args.train_dir)
    else:
        train_pool = make_pool(cfg.pools.train_seed, kind, n, m, cfg.pools.train_size)
        write_pool(train_pool, run / "instances" / f"train_{kind.value}_{n}x{m}")
    if args.eval_dir:
        eval_pool = harness.load_instance_dir(args.eval_dir)
    else:
        eval_pool = make_pool(cfg.pools.eval_seed, kind, n, m, cfg.pools.eval_size)
        write_pool(eval_pool, run / "instances" / f"eval_{kind.value}_{n}x{m}")
    env_kw = asdict(cfg.env)
    env_config = EnvConfig(variant=variant, **env_kw)
    tag = f"{variant.value}_{kind.value}_{n}x{m}_s{cfg.train.seed}"
    logs = run / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    log_path = logs / f"train_{tag}.csv"
    meta = {"config": cfg.to_dict(), "variant": variant.value, "kind": kind.value, "n": n, "m": m,
            "config_hash": harness.config_hash(cfg.to_dict()),
            "train_set": harness.instance_set_hash(train_pool),
            "eval_set": harness.instance_set_hash(eval_pool),
            "projection_norm": "L1", "advantage_normalization": cfg.train.normalize_advantages}
    (logs / f"run_{tag}.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    with open(log_path, "w") as fh:
        fh.write(",".join(TRAIN_LOG_COLUMNS) + "\n")

    def on_iteration(rec):
        with open(log_path, "a") as fh:
            fh.write(",".join(harness._fmt(getattr(rec, c)) for c in TRAIN_LOG_COLUMNS) + "\n")
        if not args.quiet:
            print(f"iter {rec.iteration:3d}  train EpLenMean {rec.train_ep_len_mean:6.2f}  "
                  f"eval EpLenMean {rec.eval_ep_len_mean:6.2f}  ({rec.seconds:.1f}s)", flush=True)

    result = train(train_pool, eval_pool, variant, env_config, cfg.train, on_iteration)
    ckpt = run / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    extra = {"env": env_kw, "train": asdict(cfg.train), "kind": kind.value,
             "best_iteration": result.best_iteration}
    save_checkpoint(result.policy, result.critic, ckpt / f"{tag}_final.npz", extra)
    save_checkpoint(result.best_policy, result.best_critic, ckpt / f"{tag}_best.npz", extra)
    print(f"checkpoints written to {ckpt} (best iteration {result.best_iteration})")
    return EXIT_OK


def cmd_eval(args) -> int:
    instances = harness.load_instance_dir(args.instances)
    if args.solver == "fp":
        result = harness.evaluate_fp(instances, args.cap, args.seed)
    else:
        proj = None
        if args.no_projection:
            proj = False
        result = harness.evaluate_checkpoint(args.solver, instances, args.cap, args.seed,
                                             args.deterministic, proj)
    out = args.out
    if out is None and args.run_dir:
        inst = instances[0]
        out = Path(args.run_dir) / "logs" / (
            f"eval_{result.row.solver}_{inst.kind.value}_{inst.n}x{inst.m}.csv")
    if out:
        harness.write_eval(result, out)
    _print_row(result.row)
    return EXIT_OK


def cmd_compare(args) -> int:
    written = harness.write_reports(args.run_dir)
    for path in written:
        if path.suffix == ".txt":
            print(path.read_text())
    if not written:
        print(f"no evaluation results under {Path(args.run_dir) / 'logs'}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(quick=not args.full) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sfpump", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate random instances")
    g.add_argument("--size", type=parse_size, action="append", help="NxM, repeatable (default 5x6)")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--kind", choices=[k.value for k in Kind], default="IP")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nested", action="store_true", help="always write into KIND_NxM subdirectories")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fp", help="run the classic feasibility pump")
    f.add_argument("instances", help="instance file or directory")
    f.add_argument("--cap", type=int, default=100)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--trace", help="write a JSON-lines trace here")
    f.add_argument("--out", help="metrics CSV path")
    f.add_argument("--no-revisits", action="store_true", help="only react to immediate repeats")
    f.set_defaults(func=cmd_fp)

    t = sub.add_parser("train", help="train a learned feasibility pump with PPO")
    t.add_argument("--variant", choices=[v.value for v in Variant], required=True)
    t.add_argument("--size", type=parse_size, default=(5, 6))
    t.add_argument("--kind", choices=[k.value for k in Kind], default="IP")
    t.add_argument("--config", help="YAML config file")
    t.add_argument("--seed", type=int)
    t.add_argument("--iterations", type=int)
    t.add_argument("--train-dir")
    t.add_argument("--eval-dir")
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate FP or a checkpoint on an instance set")
    e.add_argument("solver", help="'fp' or a checkpoint path")
    e.add_argument("instances")
    e.add_argument("--cap", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--deterministic", action="store_true", help="act with the policy mean")
    e.add_argument("--no-projection", action="store_true",
                   help="freeze the reference point at the start projection (MLP)")
    e.add_argument("--out", help="metrics CSV path")
    e.add_argument("--run-dir", help="store results under RUN_DIR/logs for 'compare'")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="build comparison tables from a run directory")
    c.add_argument("run_dir")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("selftest", help="run the built-in oracle checks")
    s.add_argument("--full", action="store_true")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"sfpump: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceFormatError, CheckpointError, harness.BindingMismatch,
            harness.MixedInstanceSets, FileNotFoundError, ValueError) as exc:
        print(f"sfpump: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LpError, NonFiniteLoss, NonFiniteActivation, FloatingPointError) as exc:
        print(f"sfpump: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
