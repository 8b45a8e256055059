"""Command-line entry points.

Subcommands: build-data (construct pre-training datasets from a document
corpus), pretrain (pre-train a group prompt), tune (run a method on a
downstream task over seeds), and report / eval (render result tables).
A JSON config file can supply any flag's value; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .corpus import (
    MCC_OPTION_CAP,
    MCC_QUERY_CAP,
    build_nsp3,
    build_nss,
    build_pseudo_ssc,
    build_unified_mc,
    lexicon_annotator,
    load_corpus,
    load_dataset,
    write_dataset,
)
from .harness import (
    DEFAULT_SEEDS,
    ExperimentSpec,
    RunContext,
    append_result,
    emit_report,
    load_results,
    run_experiment,
)
from .ioutil import write_jsonl_atomic
from .model import (
    ModelConfig,
    init_model,
    load_model,
    save_model,
    save_prompt,
)
from .pvp import RESERVED_TOKENS
from .tokenization import build_vocab, load_vocab, save_vocab
from .training import PT_LR_GRID, TrainConfig, lm_adapt, pretrain_prompt

TASK_GROUPS = {"spc": "SPC", "mcc": "MCC", "ssc": "SSC", "unified": "UNIFIED"}
METHOD_NAMES = {
    "ft": "FT",
    "pt": "PT",
    "hybrid-pt": "HybridPT",
    "lm-adaption": "LMAdaption",
    "ppt": "PPT",
    "hybrid-ppt": "HybridPPT",
    "unified-ppt": "UnifiedPPT",
    "pt-mc": "PT_MC",
}
LAYOUT_NAMES = {
    "main": "main_table",
    "uni": "uni_table",
    "sweep": "sweep",
    "convergence": "convergence",
}


def _workdir(args) -> Path:
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _vocab_path(args) -> Path:
    return _workdir(args) / "vocab.txt"


def _load_or_init_model(path: Path, vocab_size: int, seed: int):
    if path.exists():
        return load_model(path)
    config = ModelConfig(vocab_size=max(vocab_size, 5))
    params = init_model(config, seed)
    save_model(params, path)
    print(f"initialized desk-scale model at {path}")
    return params


def cmd_build_data(args) -> int:
    docs = load_corpus(args.corpus)
    vocab = build_vocab(
        [" . ".join(d.sentences) for d in docs], max_size=args.vocab_size, reserved=RESERVED_TOKENS
    )
    save_vocab(vocab, _vocab_path(args))
    if args.task == "spc":
        examples = build_nsp3(docs, args.n, args.seed)
    elif args.task == "mcc":
        caps = {}
        if args.num_options == 6:
            caps = {"max_query_len": MCC_QUERY_CAP, "max_option_len": MCC_OPTION_CAP}
        examples = build_nss(docs, args.n, args.seed, num_options=args.num_options, **caps)
    elif args.task == "ssc":
        thresholds = corpus_mod.DEFAULT_SSC_THRESHOLDS
        if args.thresholds:
            thresholds = tuple(float(x) for x in args.thresholds.split(","))
        examples = build_pseudo_ssc(docs, lexicon_annotator, args.n, args.seed, thresholds)
    else:
        examples = build_unified_mc(docs, args.n, args.seed)
    out = Path(args.out)
    train_path, valid_path = write_dataset(examples, out, args.task, seed=args.seed)
    save_vocab(vocab, out / "vocab.txt")
    print(f"wrote {train_path} and {valid_path} ({len(examples)} examples)")
    return 0


def cmd_pretrain(args) -> int:
    data_dir = Path(args.data)
    train_files = sorted(data_dir.glob("*.train.jsonl"))
    if args.task:
        train_files = [data_dir / f"{args.task}.train.jsonl"]
    if len(train_files) != 1:
        print("expected exactly one <task>.train.jsonl in --data (or pass --task)", file=sys.stderr)
        return 2
    train_path = train_files[0]
    valid_path = train_path.with_name(train_path.name.replace(".train.", ".valid."))
    train = load_dataset(train_path)
    valid = load_dataset(valid_path) if valid_path.exists() else None

    vocab_file = data_dir / "vocab.txt"
    if not vocab_file.exists():
        vocab_file = _vocab_path(args)
    vocab = load_vocab(vocab_file)
    params = _load_or_init_model(Path(args.model), len(vocab), args.model_seed)

    config = TrainConfig(
        mode="PT",
        batch_size=args.batch,
        max_steps=args.steps,
        eval_every=args.eval_every,
        lr=args.lr,
        scheduler="inverse_sqrt",
        seed=args.seed,
    )
    history: list = []
    prompt = pretrain_prompt(
        params, train, config, vocab, k=args.prompt_len, valid_data=valid, history=history
    )
    out = Path(args.out)
    save_prompt(prompt, out)
    log_path = _workdir(args) / "logs" / f"pretrain-{out.stem}.jsonl"
    write_jsonl_atomic(log_path, history)
    best = min(h["valid_loss"] for h in history if "valid_loss" in h)
    print(f"saved prompt to {out} (best validation loss {best:.4f}); log at {log_path}")
    return 0


def cmd_tune(args) -> int:
    method = METHOD_NAMES[args.method]
    vocab = load_vocab(_vocab_path(args))
    params = _load_or_init_model(Path(args.model or (_workdir(args) / "model.npz")), len(vocab), args.model_seed)

    adapted = None
    if method == "LMAdaption":
        cache = _workdir(args) / "lm_adapted.npz"
        if cache.exists():
            adapted = load_model(cache)
        else:
            if not args.corpus:
                print("lm-adaption needs --corpus to adapt the backbone", file=sys.stderr)
                return 2
            adapted = lm_adapt(params, load_corpus(args.corpus), args.lm_steps, vocab)
            save_model(adapted, cache)
            print(f"cached LM-adapted backbone at {cache}")

    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else DEFAULT_SEEDS
    if args.seed is not None:
        seeds = (args.seed,)
    group = TASK_GROUPS[args.group]
    pt_config = TrainConfig(
        mode="PT",
        batch_size=args.batch,
        max_epochs=args.epochs or 50,
        eval_every=args.eval_every,
        lr=args.lr,
        lr_grid=None if args.lr else PT_LR_GRID,
    )
    spec = ExperimentSpec(
        method=method,
        task=args.task,
        group=group,
        seeds=seeds,
        samples=args.samples,
        metric=args.metric,
    )
    ctx = RunContext(
        params=params,
        vocab=vocab,
        workdir=_workdir(args),
        adapted_params=adapted,
        k=args.prompt_len,
        pt_config=pt_config,
        record_history=args.record_history,
    )
    result = run_experiment(spec, ctx)
    results_path = _workdir(args) / "results.jsonl"
    append_result(result, results_path)
    print(
        f"{result.method} on {result.task}: mean {result.mean:.4f} std {result.std:.4f} "
        f"({len(result.per_seed)} seeds, {result.tunable_params} tunable params) -> {results_path}"
    )
    return 0


def cmd_report(args) -> int:
    results = load_results(args.inp)
    paths = emit_report(results, LAYOUT_NAMES[args.layout], args.out)
    print(f"wrote {paths['csv']} and {paths['md']}")
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file of flag defaults")
    sub.add_argument("--workdir", default="./pptlab_work")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pptlab")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("build-data", help="construct pre-training datasets from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", required=True, choices=("spc", "mcc", "ssc", "unified"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--num-options", type=int, default=6)
    p.add_argument("--thresholds", help="five comma-separated confidence thresholds")
    p.add_argument("--vocab-size", type=int, default=2048)
    _add_common(p)
    p.set_defaults(func=cmd_build_data)

    p = subs.add_parser("pretrain", help="pre-train a group prompt on built data")
    p.add_argument("--data", required=True)
    p.add_argument("--task", help="dataset name inside --data when several exist")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--eval-every", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--prompt-len", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = subs.add_parser("tune", help="run one method on a downstream task over seeds")
    p.add_argument("--method", required=True, choices=sorted(METHOD_NAMES))
    p.add_argument("--task", required=True)
    p.add_argument("--group", default="mcc", choices=sorted(TASK_GROUPS))
    p.add_argument("--seed", type=int, help="single seed (overrides --seeds)")
    p.add_argument("--seeds", help="comma-separated seed list; default 10,20,30,40,50")
    p.add_argument("--samples", type=int)
    p.add_argument("--metric", default="accuracy", choices=("accuracy", "macro_f1"))
    p.add_argument("--model")
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--prompt-len", type=int, default=100)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--epochs", type=int)
    p.add_argument("--eval-every", type=int, default=6)
    p.add_argument("--lr", type=float)
    p.add_argument("--corpus", help="unlabeled corpus for lm-adaption")
    p.add_argument("--lm-steps", type=int, default=500)
    p.add_argument("--record-history", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_tune)

    for name in ("report", "eval"):
        p = subs.add_parser(name, help="render result tables")
        p.add_argument("--layout", required=True, choices=sorted(LAYOUT_NAMES))
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--out", required=True)
        _add_common(p)
        p.set_defaults(func=cmd_report)

    return parser


def _merge_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Fill flag values from the JSON config for flags the user did not
    pass explicitly; explicit flags always win."""
    if not getattr(args, "config", None):
        return args
    cfg = json.loads(Path(args.config).read_text())
    explicit = {a[2:].split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in explicit and hasattr(args, dest):
            setattr(args, dest, value)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _merge_config(args, argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
