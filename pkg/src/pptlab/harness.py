"""Experiment orchestration: run a (method, task) cell over seeds,
aggregate mean and standard deviation, and render report tables.

Methods cover the full grid: full-model tuning, vanilla and hybrid prompt
tuning, LM adaption, pre-trained prompt tuning (plain, hybrid, unified),
and the multiple-choice-format ablation without pre-training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .fewshot import FewShotSplit, TaskSource, load_task, sample_fewshot, sample_sweep
from .ioutil import read_jsonl, write_jsonl_atomic, write_text_atomic
from .model import ModelParams, SoftPrompt, init_soft_prompt, load_prompt
from .pvp import (
    MCC,
    SPC,
    SSC,
    UNIFIED_MC,
    TaskInstance,
    attach_hard_prompt,
    builtin_hard_prompt,
    make_builtin_pvp,
    to_unified_mc,
)
from .tokenization import Vocabulary
from .training import (
    FT_LR_GRIDS,
    PT_LR_GRID,
    TrainConfig,
    evaluate_accuracy,
    full_model_tune,
    prompt_tune,
)

logger = logging.getLogger(__name__)

METHODS = ("FT", "PT", "HybridPT", "LMAdaption", "PPT", "HybridPPT", "UnifiedPPT", "PT_MC")
PPT_FAMILY = ("PPT", "HybridPPT", "UnifiedPPT")
GROUPS = (SPC, MCC, SSC, "UNIFIED")
DEFAULT_SEEDS = (10, 20, 30, 40, 50)

METHOD_DISPLAY = {
    "FT": "FT",
    "PT": "Vanilla PT",
    "HybridPT": "Hybrid PT",
    "LMAdaption": "LM Adaption",
    "PPT": "PPT",
    "HybridPPT": "Hybrid PPT",
    "UnifiedPPT": "Unified PPT",
    "PT_MC": "PT (MC)",
}

LAYOUTS = ("main_table", "uni_table", "sweep", "convergence")

_SUBSCRIPT = str.maketrans("0123456789()", "₀₁₂₃₄₅₆₇₈₉₍₎")


@dataclass(frozen=True)
class ExperimentSpec:
    method: str
    task: str | TaskSource
    group: str
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    samples: int | None = None
    metric: str = "accuracy"

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.group not in GROUPS:
            raise ValueError(f"unknown group {self.group!r}")
        if self.metric not in ("accuracy", "macro_f1"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")


@dataclass
class ExperimentResult:
    method: str
    task: str
    samples: int
    metric: str
    seeds: tuple[int, ...]
    per_seed: list[float]
    mean: float
    std: float
    tunable_params: int
    extras: dict = field(default_factory=dict)
    histories: list | None = None

    def to_record(self) -> dict:
        rec = {
            "method": self.method,
            "task": self.task,
            "samples": self.samples,
            "metric": self.metric,
            "seeds": list(self.seeds),
            "per_seed": self.per_seed,
            "mean": self.mean,
            "std": self.std,
            "tunable_params": self.tunable_params,
            "extras": self.extras,
        }
        if self.histories is not None:
            rec["histories"] = self.histories
        return rec

    @staticmethod
    def from_record(rec: dict) -> "ExperimentResult":
        return ExperimentResult(
            method=rec["method"],
            task=rec["task"],
            samples=int(rec["samples"]),
            metric=rec["metric"],
            seeds=tuple(rec["seeds"]),
            per_seed=[float(x) for x in rec["per_seed"]],
            mean=float(rec["mean"]),
            std=float(rec["std"]),
            tunable_params=int(rec["tunable_params"]),
            extras=rec.get("extras", {}),
            histories=rec.get("histories"),
        )


@dataclass
class RunContext:
    """Artifacts an experiment needs: the frozen backbone, the vocabulary,
    pre-trained prompt checkpoints (in memory or on disk under
    <workdir>/prompts/<group>.ppt), and training configuration."""

    params: ModelParams
    vocab: Vocabulary
    workdir: str | Path | None = None
    prompts: dict[str, SoftPrompt] = field(default_factory=dict)
    adapted_params: ModelParams | None = None
    k: int = 100
    pt_config: TrainConfig | None = None
    ft_config: TrainConfig | None = None
    ft_size_tag: str = "small"
    record_history: bool = False
    log_dir: str | Path | None = None

    def prompt_for(self, group: str) -> SoftPrompt:
        if group in self.prompts:
            return self.prompts[group]
        if self.workdir is not None:
            path = Path(self.workdir) / "prompts" / f"{group}.ppt"
            if path.exists():
                return load_prompt(path)
        raise ValueError(f"pre-trained prompt not found for group {group}")


def aggregate(per_seed: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation (divisor N)."""
    if len(per_seed) == 0:
        raise ValueError("empty metric list")
    arr = np.asarray(per_seed, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


def macro_f1(golds: Sequence[int], preds: Sequence[int], labels: Sequence[int]) -> float:
    """Unweighted mean of per-label F1; a label with no gold and no
    predicted instances contributes 0."""
    scores = []
    for y in labels:
        tp = sum(1 for g, p in zip(golds, preds) if g == y and p == y)
        fp = sum(1 for g, p in zip(golds, preds) if g != y and p == y)
        fn = sum(1 for g, p in zip(golds, preds) if g == y and p != y)
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def _builtin_for_source(source: TaskSource):
    if source.format == SPC:
        return make_builtin_pvp(SPC, n_labels=source.n_class)
    if source.format == SSC:
        return make_builtin_pvp(SSC, n_labels=source.n_class)
    return make_builtin_pvp(source.format, n_options=source.n_class)


def _convert_split_to_mc(split: FewShotSplit, fmt: str, verbalizer) -> tuple[FewShotSplit, int]:
    def convert(instances):
        out = []
        n_opt = None
        for inst in instances:
            slots, n, gold = to_unified_mc(fmt, inst.slot_values, verbalizer, inst.gold_label)
            n_opt = n
            out.append(TaskInstance(slots, gold))
        return tuple(out), n_opt

    train, n1 = convert(split.train)
    dev, n2 = convert(split.dev)
    test, n3 = convert(split.test)
    n_options = n1 or n2 or n3
    if len({n for n in (n1, n2, n3) if n is not None}) > 1:
        raise ValueError("inconsistent option counts after unified conversion")
    return FewShotSplit(train, dev, test, split.seed, n_options), n_options


def _run_seed(
    spec: ExperimentSpec, ctx: RunContext, source: TaskSource, seed: int, split: FewShotSplit
) -> tuple[float, float, int, list | None]:
    """Resolve the method's pattern and initialization, train on one split,
    and evaluate on the test pool. Returns (metric value, accuracy,
    tunable parameter count, raw training history)."""
    d_model = ctx.params.config.d_model
    template, verbalizer = _builtin_for_source(source)

    if spec.method in ("UnifiedPPT", "PT_MC"):
        split, n_options = _convert_split_to_mc(split, source.format, verbalizer)
        template, verbalizer = make_builtin_pvp(UNIFIED_MC, n_options=n_options)
    elif spec.method in ("HybridPT", "HybridPPT"):
        template = attach_hard_prompt(
            template, builtin_hard_prompt(source.format, n_options=source.n_class)
        )

    params = ctx.params
    if spec.method == "LMAdaption":
        if ctx.adapted_params is None:
            raise ValueError("LM-adapted backbone not available in context")
        params = ctx.adapted_params

    history: list | None = [] if ctx.record_history else None
    if spec.method == "FT":
        config = ctx.ft_config or TrainConfig(mode="FT", lr_grid=FT_LR_GRIDS[ctx.ft_size_tag])
        config = replace(config, seed=seed)
        tuned_params, _dev = full_model_tune(
            params, split, template, verbalizer, ctx.vocab, config, history=history
        )
        eval_params, eval_prompt = tuned_params, None
        tunable = ctx.params.census()
    else:
        if spec.method in PPT_FAMILY:
            group = "UNIFIED" if spec.method == "UnifiedPPT" else spec.group
            prompt_init = ctx.prompt_for(group)
            if prompt_init.d != d_model:
                raise ValueError("prompt shape mismatch")
        else:
            prompt_init = init_soft_prompt("random", k=ctx.k, d_model=d_model, seed=seed)
        config = ctx.pt_config or TrainConfig(mode="PT", lr_grid=PT_LR_GRID)
        config = replace(config, seed=seed)
        tuned_prompt, _dev = prompt_tune(
            params, prompt_init, split, template, verbalizer, ctx.vocab, config, history=history
        )
        eval_params, eval_prompt = params, tuned_prompt
        tunable = prompt_init.k * prompt_init.d

    acc, preds = evaluate_accuracy(
        eval_params, eval_prompt, split.test, template, verbalizer, ctx.vocab
    )
    if spec.metric == "macro_f1":
        golds = [inst.gold_label for inst in split.test]
        value = macro_f1(golds, preds, verbalizer.labels)
    else:
        value = acc
    return value, acc, tunable, history


def _selected_series(history: list) -> list:
    selected = [rec for rec in history if "selected_arm_lr" in rec]
    arm = selected[-1]["selected_arm_lr"] if selected else None
    return [
        [rec["step"], rec["dev_metric"]]
        for rec in history
        if "dev_metric" in rec and "step" in rec and (arm is None or rec.get("arm_lr") == arm)
    ]


def _write_seed_log(ctx: RunContext, spec: ExperimentSpec, task: str, seed: int, history: list) -> None:
    if ctx.log_dir is None or history is None:
        return
    path = Path(ctx.log_dir) / f"{spec.method}-{task}-seed{seed}.jsonl"
    write_jsonl_atomic(path, history)


def _finish(
    spec: ExperimentSpec,
    ctx: RunContext,
    task_name: str,
    samples: int,
    per_seed: list[float],
    per_seed_acc: list[float],
    tunable: int,
    histories: list,
) -> ExperimentResult:
    mean, std = aggregate(per_seed)
    return ExperimentResult(
        method=spec.method,
        task=task_name,
        samples=samples,
        metric=spec.metric,
        seeds=spec.seeds,
        per_seed=per_seed,
        mean=mean,
        std=std,
        tunable_params=tunable,
        extras={"accuracy_per_seed": per_seed_acc},
        histories=histories if ctx.record_history else None,
    )


def run_experiment(spec: ExperimentSpec, ctx: RunContext) -> ExperimentResult:
    """Run one (method, task, sample-count) cell over all seeds.

    Per seed: sample the few-shot split, resolve the prompt initialization
    and pattern for the method, train, and evaluate on the test pool.
    """
    source = load_task(spec.task) if isinstance(spec.task, (str, Path)) else spec.task
    per_seed: list[float] = []
    per_seed_acc: list[float] = []
    histories: list = []
    tunable = 0
    samples = spec.samples
    for seed in spec.seeds:
        split = sample_fewshot(source, seed, size=spec.samples)
        samples = samples if samples is not None else len(split.train)
        value, acc, tunable, history = _run_seed(spec, ctx, source, seed, split)
        per_seed.append(value)
        per_seed_acc.append(acc)
        if history is not None:
            histories.append({"seed": seed, "series": _selected_series(history)})
            _write_seed_log(ctx, spec, source.name, seed, history)
    return _finish(spec, ctx, source.name, samples, per_seed, per_seed_acc, tunable, histories)


def run_sweep(spec: ExperimentSpec, ctx: RunContext, sizes: Sequence[int]) -> list[ExperimentResult]:
    """Sample-efficiency sweep: per seed the splits are nested across
    sizes, and one result row is produced per (method, task, size) cell."""
    source = load_task(spec.task) if isinstance(spec.task, (str, Path)) else spec.task
    cells: dict[int, dict[str, list]] = {
        size: {"per_seed": [], "acc": [], "histories": []} for size in sizes
    }
    tunable = 0
    for seed in spec.seeds:
        splits = sample_sweep(source, list(sizes), seed)
        for size, split in zip(sizes, splits):
            value, acc, tunable, history = _run_seed(spec, ctx, source, seed, split)
            cells[size]["per_seed"].append(value)
            cells[size]["acc"].append(acc)
            if history is not None:
                cells[size]["histories"].append({"seed": seed, "series": _selected_series(history)})
    results = []
    for size in sizes:
        cell_spec = replace(spec, samples=size)
        results.append(
            _finish(
                cell_spec,
                ctx,
                source.name,
                size,
                cells[size]["per_seed"],
                cells[size]["acc"],
                tunable,
                cells[size]["histories"],
            )
        )
    return results


def save_results(results: Sequence[ExperimentResult], path: str | Path) -> None:
    write_jsonl_atomic(path, [r.to_record() for r in results])


def append_result(result: ExperimentResult, path: str | Path) -> None:
    existing = load_results(path) if Path(path).exists() else []
    save_results(existing + [result], path)


def load_results(path: str | Path) -> list[ExperimentResult]:
    return [ExperimentResult.from_record(rec) for rec in read_jsonl(path)]


# ---------------------------------------------------------------------------
# report rendering
# ---------------------------------------------------------------------------


def _fmt_cell(mean: float, std: float) -> str:
    """Percentage mean to one decimal with the std subscripted, e.g.
    93.5₍₀.₃₎."""
    sub = f"({100 * std:.1f})".translate(_SUBSCRIPT)
    return f"{100 * mean:.1f}{sub}"


def _method_order(methods: Sequence[str]) -> list[str]:
    return [m for m in METHODS if m in set(methods)]


def _mark(cell: str, bold: bool, underline: bool) -> str:
    if bold:
        cell = f"**{cell}**"
    if underline:
        cell = f"<u>{cell}</u>"
    return cell


def _grid_markdown(
    results: dict[tuple[str, str], ExperimentResult],
    methods: list[str],
    tasks: list[str],
    warnings: list[str],
) -> str:
    best_all: dict[str, float] = {}
    best_pt: dict[str, float] = {}
    for (method, task), res in results.items():
        best_all[task] = max(best_all.get(task, -1.0), res.mean)
        if method != "FT":
            best_pt[task] = max(best_pt.get(task, -1.0), res.mean)

    lines = ["| Method | " + " | ".join(tasks) + " |"]
    lines.append("|---" * (len(tasks) + 1) + "|")
    for method in methods:
        row = [METHOD_DISPLAY[method]]
        for task in tasks:
            res = results.get((method, task))
            if res is None:
                row.append("—")
                continue
            cell = _fmt_cell(res.mean, res.std)
            bold = res.mean == best_all[task]
            underline = method != "FT" and res.mean == best_pt.get(task)
            row.append(_mark(cell, bold, underline))
        lines.append("| " + " | ".join(row) + " |")
    if warnings:
        lines.append("")
        for w in warnings:
            lines.append(f"- warning: {w}")
    lines.append("")
    lines.append("Bold marks the best method per task; underline marks the best")
    lines.append("prompt-tuning method (every method except FT).")
    return "\n".join(lines) + "\n"


def _grid_csv(results: Sequence[ExperimentResult]) -> str:
    header = "method,task,samples,metric,mean,std,n_seeds,tunable_params,per_seed"
    rows = [header]
    for res in sorted(results, key=lambda r: (METHODS.index(r.method), r.task, r.samples)):
        per_seed = ";".join(f"{x:.6f}" for x in res.per_seed)
        rows.append(
            f"{res.method},{res.task},{res.samples},{res.metric},"
            f"{res.mean:.6f},{res.std:.6f},{len(res.per_seed)},{res.tunable_params},{per_seed}"
        )
    return "\n".join(rows) + "\n"


def _sweep_markdown(results: Sequence[ExperimentResult], warnings: list[str]) -> str:
    tasks = sorted({r.task for r in results})
    methods = _method_order([r.method for r in results])
    sizes = sorted({r.samples for r in results})
    by_key = {(r.method, r.task, r.samples): r for r in results}
    lines = ["| Method | Samples | " + " | ".join(tasks) + " |"]
    lines.append("|---" * (len(tasks) + 2) + "|")
    for method in methods:
        for size in sizes:
            row = [METHOD_DISPLAY[method], str(size)]
            any_cell = False
            for task in tasks:
                res = by_key.get((method, task, size))
                if res is None:
                    row.append("—")
                else:
                    row.append(_fmt_cell(res.mean, res.std))
                    any_cell = True
            if any_cell:
                lines.append("| " + " | ".join(row) + " |")
    if warnings:
        lines.append("")
        for w in warnings:
            lines.append(f"- warning: {w}")
    return "\n".join(lines) + "\n"


def _convergence_rows(results: Sequence[ExperimentResult]) -> list[tuple]:
    rows = []
    for res in results:
        for entry in res.histories or []:
            for step, metric in entry["series"]:
                rows.append((res.method, res.task, entry["seed"], int(step), float(metric)))
    rows.sort(key=lambda r: (METHODS.index(r[0]), r[1], r[2], r[3]))
    return rows


def emit_report(
    results: Sequence[ExperimentResult], layout: str, out_dir: str | Path
) -> dict[str, Path]:
    """Write a CSV (machine) and Markdown (human) report for a layout.

    Missing cells render as em-dashes and are listed as warnings. Output is
    byte-stable for a given results set.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"report_{layout}.csv"
    md_path = out_dir / f"report_{layout}.md"

    if layout == "convergence":
        rows = _convergence_rows(results)
        csv_lines = ["method,task,seed,step,dev_metric"]
        csv_lines += [f"{m},{t},{s},{step},{val:.6f}" for m, t, s, step, val in rows]
        write_text_atomic(csv_path, "\n".join(csv_lines) + "\n")
        methods = _method_order({r[0] for r in rows})
        steps = sorted({r[3] for r in rows})
        by_ms: dict[tuple[str, int], list[float]] = {}
        for m, _t, _s, step, val in rows:
            by_ms.setdefault((m, step), []).append(val)
        lines = ["| Step | " + " | ".join(METHOD_DISPLAY[m] for m in methods) + " |"]
        lines.append("|---" * (len(methods) + 1) + "|")
        for step in steps:
            row = [str(step)]
            for m in methods:
                vals = by_ms.get((m, step))
                row.append(f"{100 * float(np.mean(vals)):.1f}" if vals else "—")
            lines.append("| " + " | ".join(row) + " |")
        write_text_atomic(md_path, "\n".join(lines) + "\n")
        return {"csv": csv_path, "md": md_path}

    write_text_atomic(csv_path, _grid_csv(results))

    if layout == "sweep":
        warnings: list[str] = []
        write_text_atomic(md_path, _sweep_markdown(results, warnings))
        return {"csv": csv_path, "md": md_path}

    methods = _method_order([r.method for r in results])
    if layout == "uni_table":
        keep = [m for m in ("FT", "PT", "PT_MC", "UnifiedPPT") if m in methods]
        methods = keep or methods
    tasks = sorted({r.task for r in results})
    warnings = []
    cells: dict[tuple[str, str], ExperimentResult] = {}
    for res in sorted(results, key=lambda r: (METHODS.index(r.method), r.task, r.samples)):
        key = (res.method, res.task)
        if res.method not in methods:
            continue
        if key in cells:
            warnings.append(f"duplicate cell for {key}; keeping the first")
            continue
        cells[key] = res
    for method in methods:
        for task in tasks:
            if (method, task) not in cells:
                warnings.append(f"missing cell ({method}, {task})")
    for w in warnings:
        logger.warning("%s", w)
    write_text_atomic(md_path, _grid_markdown(cells, methods, tasks, warnings))
    return {"csv": csv_path, "md": md_path}
