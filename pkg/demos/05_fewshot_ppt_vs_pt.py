"""The headline experiment at reduced scale: pre-trained prompt tuning
(PPT) versus vanilla prompt tuning (PT) on a 32-sample few-shot task.

Pre-trains a multiple-choice group prompt on one synthetic corpus, then
tunes on a next-sentence task from a corpus the prompt never saw, over
three seeds. PPT should win on mean accuracy with a smaller spread and
reach its dev plateau sooner. Takes several minutes; the acceptance suite
runs the full protocol (2,000 pre-training steps, five seeds, three
corpus draws), which separates the methods more sharply than this
shortened pass.
"""

from pptlab import ExperimentSpec, RunContext, TrainConfig, pretrain_prompt, run_experiment
from pptlab.synth import experiment_world

print("building corpora, warming the backbone, and pre-training the MCC prompt...")
world = experiment_world(0)
prompt = pretrain_prompt(
    world["params"],
    world["pretrain_data"],
    TrainConfig(mode="PT", batch_size=16, max_steps=1200, eval_every=50,
                lr=0.1, scheduler="inverse_sqrt", seed=0),
    world["vocab"],
    k=100,
)

ctx = RunContext(
    params=world["params"],
    vocab=world["vocab"],
    prompts={"MCC": prompt},
    k=100,
    pt_config=TrainConfig(mode="PT", batch_size=16, max_epochs=50, eval_every=6, lr=5e-3),
    record_history=True,
)

seeds = (10, 20, 30)
results = {}
for method in ("PPT", "PT"):
    spec = ExperimentSpec(method=method, task=world["task"], group="MCC", seeds=seeds)
    results[method] = run_experiment(spec, ctx)
    r = results[method]
    per_seed = ", ".join(f"{x:.3f}" for x in r.per_seed)
    print(f"{method:>4}: test accuracy per seed [{per_seed}] -> mean {r.mean:.3f}, std {r.std:.3f}")

ppt, pt = results["PPT"], results["PT"]
print(f"\nmean(PPT) >= mean(PT):        {ppt.mean:.3f} >= {pt.mean:.3f} -> {ppt.mean >= pt.mean}")
print(f"std(PPT) <= std(PT) + 0.02:   {ppt.std:.3f} <= {pt.std + 0.02:.3f} -> {ppt.std <= pt.std + 0.02}")

print("\ndev-accuracy trajectories (first evaluations, every 6 steps):")
for method in ("PPT", "PT"):
    for hist in results[method].histories:
        head = ", ".join(f"{step}:{metric:.2f}" for step, metric in hist["series"][:5])
        print(f"  {method:>4} seed {hist['seed']}: {head}")
