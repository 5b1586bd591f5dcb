"""Command-line entry point.

Subcommands: train, eval, ablate, gradcheck, synth, stats, defaults.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Precedence: command-line flags > config file > built-in defaults; the
effective configuration is echoed to stdout and into output artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .contrastive import ContrastiveConfig
from .data import dataset_stats, load_emb1, write_emb1
from .encoder import EncoderDims, load_checkpoint, save_checkpoint
from .episodes import SynthSpec, synth_dataset
from .errors import (DataFormatError, DivergenceError, FsedError,
                     NonFiniteError, SamplingError, ValidationError)
from .trainer import Config, ablate, evaluate, train, write_ablation_csv

USAGE_ERROR, DATA_ERROR, NUMERIC_ERROR = 1, 2, 3

CONFIG_KEYS = {
    "n_way": int, "k_shot": int, "m_query": int, "metric": str,
    "tat_enabled": bool, "learning_rate": float, "weight_decay": float,
    "train_iterations": int, "eval_episodes": int, "val_episodes": int,
    "val_interval": int, "runs": int, "seed": int,
    "alpha": float, "beta": float, "tau_sscl": float, "tau_pqcl": float,
    "o_subsample_cap": int,
    "d_hidden": int, "d_rep": int, "d_proj_hidden": int, "d_proj": int,
    "train_path": str, "valid_path": str, "test_path": str, "out_dir": str,
    # synthetic-generator keys
    "class_count": int, "sentences_per_class": int, "sentence_length": int,
    "d_in": int, "cluster_separation": float, "o_noise_scale": float,
    "overlap_fraction": float, "split": str,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _default_values() -> dict:
    cfg = Config()
    cc = ContrastiveConfig()
    dims = EncoderDims(d_in=0)
    spec = SynthSpec()
    out = {
        "n_way": cfg.n_way, "k_shot": cfg.k_shot, "m_query": cfg.m_query,
        "metric": cfg.metric, "tat_enabled": cfg.tat_enabled,
        "learning_rate": cfg.learning_rate, "weight_decay": cfg.weight_decay,
        "train_iterations": cfg.train_iterations,
        "eval_episodes": cfg.eval_episodes, "val_episodes": cfg.val_episodes,
        "val_interval": cfg.val_interval, "runs": cfg.runs, "seed": cfg.seed,
        "alpha": cc.alpha, "beta": cc.beta,
        "tau_sscl": cc.tau_sscl, "tau_pqcl": cc.tau_pqcl,
        "o_subsample_cap": cc.o_subsample_cap,
        "d_hidden": dims.d_hidden, "d_rep": dims.d_rep,
        "d_proj_hidden": dims.d_proj_hidden, "d_proj": dims.d_proj,
        "class_count": spec.class_count,
        "sentences_per_class": spec.sentences_per_class,
        "sentence_length": spec.sentence_length, "d_in": spec.d_in,
        "cluster_separation": spec.cluster_separation,
        "o_noise_scale": spec.o_noise_scale,
        "overlap_fraction": spec.overlap_fraction,
        "split": "train",
    }
    return out


def _load_config_file(path) -> dict:
    with open(path) as f:
        raw = json.load(f)
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _effective(args) -> dict:
    values = _default_values()
    if getattr(args, "config", None):
        values.update(_load_config_file(args.config))
    overrides = {
        "n_way": args.n, "k_shot": args.k, "m_query": args.m,
        "seed": args.seed, "alpha": args.alpha, "beta": args.beta,
        "tau_sscl": args.tau_sscl, "tau_pqcl": args.tau_pqcl,
        "metric": args.metric, "train_iterations": args.iterations,
        "runs": args.runs, "out_dir": args.out,
    }
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    if getattr(args, "no_tat", False):
        values["tat_enabled"] = False
    return values


def _build_config(values, d_in) -> Config:
    contrastive = ContrastiveConfig(
        tau_sscl=values["tau_sscl"], tau_pqcl=values["tau_pqcl"],
        alpha=values["alpha"], beta=values["beta"],
        o_subsample_cap=values["o_subsample_cap"])
    dims = EncoderDims(d_in=d_in, d_hidden=values["d_hidden"],
                       d_rep=values["d_rep"],
                       d_proj_hidden=values["d_proj_hidden"],
                       d_proj=values["d_proj"])
    return Config(
        n_way=values["n_way"], k_shot=values["k_shot"],
        m_query=values["m_query"], dims=dims, metric=values["metric"],
        contrastive=contrastive, tat_enabled=values["tat_enabled"],
        learning_rate=values["learning_rate"],
        weight_decay=values["weight_decay"],
        train_iterations=values["train_iterations"],
        eval_episodes=values["eval_episodes"],
        val_episodes=values["val_episodes"],
        val_interval=values["val_interval"],
        runs=values["runs"], seed=values["seed"])


def _echo(values):
    print("# effective config")
    print(json.dumps(values, indent=2, sort_keys=True))


def _add_shared_flags(p):
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau-sscl", type=float, dest="tau_sscl")
    p.add_argument("--tau-pqcl", type=float, dest="tau_pqcl")
    p.add_argument("--metric", choices=("euclid", "dot", "cosine"))
    p.add_argument("--no-tat", action="store_true")
    p.add_argument("--iterations", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--out", metavar="DIR")


def _cmd_defaults(args):
    print(json.dumps(_default_values(), indent=2, sort_keys=True))
    return 0


def _cmd_stats(args):
    ds = load_emb1(args.file)
    s = dataset_stats(ds)
    print(f"classes={s.class_count} triggers={s.trigger_count} "
          f"avg_len={s.avg_sentence_length:g}")
    return 0


def _cmd_synth(args):
    values = _effective(args)
    spec = SynthSpec(class_count=values["class_count"],
                     sentences_per_class=values["sentences_per_class"],
                     sentence_length=values["sentence_length"],
                     d_in=values["d_in"],
                     cluster_separation=values["cluster_separation"],
                     o_noise_scale=values["o_noise_scale"],
                     overlap_fraction=values["overlap_fraction"])
    _echo(values)
    ds = synth_dataset(spec, values["seed"], split=values["split"])
    write_emb1(ds, args.file)
    print(f"wrote {args.file}: {len(ds.records)} sentences, d={ds.dim}")
    return 0


def _cmd_gradcheck(args):
    from .verification import run_gradient_suite
    report = run_gradient_suite(seed=args.seed or 0)
    worst = 0.0
    for name, err in report.items():
        print(f"{name}: max_error={err:.3e}")
        worst = max(worst, err)
    if worst > 1e-5:
        print("gradcheck FAILED", file=sys.stderr)
        return NUMERIC_ERROR
    print("gradcheck OK")
    return 0


def _cmd_train(args):
    values = _effective(args)
    train_ds = load_emb1(values["train_path"])
    valid_ds = load_emb1(values["valid_path"])
    config = _build_config(values, train_ds.dim)
    values["variant"] = config.variant_name()
    _echo(values)
    params, log = train(config, train_ds, valid_ds)
    out_dir = values.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(params, values, os.path.join(out_dir, "model.psc1"))
    log.write_jsonl(os.path.join(out_dir, "trainlog.jsonl"))
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(values, f, indent=2, sort_keys=True)
    print(f"trained {config.train_iterations} iterations "
          f"(variant {values['variant']}); outputs in {out_dir}")
    return 0


def _cmd_eval(args):
    values = _effective(args)
    params, saved_cfg = load_checkpoint(args.checkpoint)
    test_ds = load_emb1(values["test_path"])
    config = _build_config(values, test_ds.dim)
    _echo(values)
    metrics = evaluate(params, config, test_ds)
    print(f"tp={metrics.tp} fp={metrics.fp} fn={metrics.fn}")
    print(f"precision={metrics.precision:.4f} recall={metrics.recall:.4f} "
          f"f1={metrics.f1:.4f}")
    return 0


def _cmd_ablate(args):
    values = _effective(args)
    train_ds = load_emb1(values["train_path"])
    valid_ds = load_emb1(values["valid_path"])
    test_ds = load_emb1(values["test_path"])
    config = _build_config(values, train_ds.dim)
    _echo(values)
    results = ablate(config, train_ds, valid_ds, test_ds)
    out_dir = values.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "ablation.csv")
    write_ablation_csv(results, path)
    for name, m in results.items():
        print(f"{name}: P={m.precision:.4f} R={m.recall:.4f} "
              f"F1={m.f1_mean:.4f}+/-{m.f1_std:.4f}")
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = _Parser(prog="fsed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("defaults")
    p.set_defaults(func=_cmd_defaults)

    p = sub.add_parser("stats")
    p.add_argument("file")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("synth")
    p.add_argument("file")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("gradcheck")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("train")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval")
    p.add_argument("checkpoint")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_ablate)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return args.func(args)
    except (NonFiniteError, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (DataFormatError, ValidationError, SamplingError, FsedError,
            OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except KeyError as exc:
        print(f"usage error: missing config value {exc}", file=sys.stderr)
        return USAGE_ERROR


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
