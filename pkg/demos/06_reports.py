"""Report rendering: mean-and-subscript-std cells, bold best per column,
underline best prompt-tuning method, plus the sweep and convergence
layouts."""

import tempfile
from pathlib import Path

from pptlab import ExperimentResult, emit_report


def cell(method, task, mean, std, samples=32, histories=None):
    return ExperimentResult(
        method=method, task=task, samples=samples, metric="accuracy",
        seeds=(10, 20, 30, 40, 50), per_seed=[mean] * 5, mean=mean, std=std,
        tunable_params=6400 if method != "FT" else 492288, histories=histories,
    )


main_results = [
    cell("FT", "pairs", 0.808, 0.024), cell("FT", "reviews", 0.914, 0.008),
    cell("PT", "pairs", 0.610, 0.053), cell("PT", "reviews", 0.705, 0.155),
    cell("HybridPT", "pairs", 0.798, 0.015), cell("HybridPT", "reviews", 0.876, 0.066),
    cell("PPT", "pairs", 0.664, 0.057), cell("PPT", "reviews", 0.935, 0.003),
    cell("HybridPPT", "pairs", 0.820, 0.010), cell("HybridPPT", "reviews", 0.938, 0.001),
    cell("UnifiedPPT", "pairs", 0.760, 0.027), cell("UnifiedPPT", "reviews", 0.944, 0.003),
]

with tempfile.TemporaryDirectory() as tmp:
    paths = emit_report(main_results, "main_table", tmp)
    print("--- main table (markdown) ---\n")
    print(Path(paths["md"]).read_text())

    sweep_results = [
        cell(method, "pairs", mean, 0.02, samples=size)
        for method, means in (("FT", (0.70, 0.78, 0.82)), ("PT", (0.55, 0.68, 0.80)), ("PPT", (0.72, 0.79, 0.82)))
        for size, mean in zip((32, 64, 128), means)
    ]
    paths = emit_report(sweep_results, "sweep", tmp)
    print("--- sample-efficiency sweep ---\n")
    print(Path(paths["md"]).read_text())

    conv_results = [
        cell("PT", "pairs", 0.6, 0.05,
             histories=[{"seed": 10, "series": [[6, 0.45], [12, 0.55], [18, 0.60]]}]),
        cell("PPT", "pairs", 0.75, 0.01,
             histories=[{"seed": 10, "series": [[6, 0.72], [12, 0.74], [18, 0.75]]}]),
    ]
    paths = emit_report(conv_results, "convergence", tmp)
    print("--- convergence (mean dev accuracy by step) ---\n")
    print(Path(paths["md"]).read_text())
    print("CSV files carry the same data for machines:", sorted(p.name for p in Path(tmp).glob("*.csv")))
