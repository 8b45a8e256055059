"""The frozen text-to-text backbone and its soft-prompt block.

Demonstrates parameter accounting, the prompt-only gradient contract, a
finite-difference spot check of the analytic gradients, and the prompt
checkpoint format.
"""

import tempfile
from pathlib import Path

import numpy as np

from pptlab import (
    FT,
    PT,
    ModelConfig,
    SoftPrompt,
    count_tunable,
    forward_mask_distribution,
    init_model,
    init_soft_prompt,
    load_prompt,
    loss_and_grad,
    save_prompt,
)
from pptlab.tokenization import MASK_ID

print("--- parameter accounting ---")
full_scale_prompt = SoftPrompt(np.zeros((100, 4096), dtype=np.float32))
print(f"100 x 4096 prompt -> {count_tunable(None, full_scale_prompt, PT):,} tunable parameters (410K)")
config = ModelConfig()  # desk default: d=64, 2+2 layers, 4 heads, vocab 2048
params = init_model(config, seed=0)
desk_prompt = init_soft_prompt("random", k=100, d_model=config.d_model, seed=1)
print(f"desk prompt 100 x {config.d_model} -> {count_tunable(None, desk_prompt, PT):,}")
print(f"desk backbone census (FT) -> {count_tunable(params, None, FT):,}")

print("\n--- forward pass at the mask ---")
rng = np.random.default_rng(0)
ids = rng.integers(4, config.vocab_size, size=10).tolist()
ids[4] = MASK_ID
dist = forward_mask_distribution(params, desk_prompt, ids, 4)
print(f"distribution over {len(dist)} tokens sums to {dist.sum():.9f}")

print("\n--- gradient modes ---")
batch = [(ids, 4, 42)]
loss, grads = loss_and_grad(params, desk_prompt, batch, PT)
print(f"PT mode: loss {loss:.3f}; gradient entries = {grads.prompt.size:,} (prompt only, backbone absent)")
loss, grads = loss_and_grad(params, desk_prompt, batch, FT)
print(f"FT mode: loss {loss:.3f}; gradient tensors = {len(grads.params)} backbone arrays + prompt")

print("\n--- finite-difference spot check (64-bit) ---")
config64 = ModelConfig(d_model=32, n_layers_enc=2, n_layers_dec=2, n_heads=4,
                       d_ff=64, max_len=64, vocab_size=64, dtype="float64")
params64 = init_model(config64, seed=2)
prompt64 = SoftPrompt(np.random.default_rng(3).standard_normal((4, 32)) * 0.5)
small_ids = [5, 6, MASK_ID, 7, 8, 9]
small_batch = [(small_ids, 2, 11)]
_, grads = loss_and_grad(params64, prompt64, small_batch, PT)
eps, worst = 1e-4, 0.0
for idx in [(0, 0), (1, 7), (3, 31)]:
    orig = prompt64.matrix[idx]
    prompt64.matrix[idx] = orig + eps
    up, _ = loss_and_grad(params64, prompt64, small_batch, PT)
    prompt64.matrix[idx] = orig - eps
    down, _ = loss_and_grad(params64, prompt64, small_batch, PT)
    prompt64.matrix[idx] = orig
    fd = (up - down) / (2 * eps)
    rel = abs(fd - grads.prompt[idx]) / max(abs(fd), 1e-10)
    worst = max(worst, rel)
    print(f"coordinate {idx}: analytic {grads.prompt[idx]:+.6e}, central diff {fd:+.6e}, rel err {rel:.1e}")
print(f"worst relative error: {worst:.2e}")

print("\n--- prompt checkpoint format ---")
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.ppt"
    save_prompt(desk_prompt, path)
    raw = path.read_bytes()
    print(f"header: magic={raw[:4]}, k={int.from_bytes(raw[4:8], 'little')}, "
          f"d={int.from_bytes(raw[8:12], 'little')}, reserved={raw[12:16].hex()}")
    loaded = load_prompt(path)
    print(f"round trip exact: {np.array_equal(loaded.matrix, desk_prompt.matrix)}")
