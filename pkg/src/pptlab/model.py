"""Desk-scale text-to-text encoder-decoder with a soft-prompt block.

The encoder consumes [prompt embeddings ; token embeddings]; the decoder
is fed the mask sentinel and emits the vocabulary distribution for the
masked position (teacher-forced over up to a few positions for the span
objective). Forward and backward passes are written directly in numpy so
gradient flow is fully explicit: under prompt tuning only the prompt
matrix receives gradients and the backbone is untouched by construction.

Layers are pre-norm transformer blocks with RMS normalization (gain only),
ReLU feed-forwards, no biases, and fixed sinusoidal positions added to
token embeddings (prompt vectors enter as-is, so word-initialized prompts
equal the copied embedding rows exactly).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .tokenization import MASK_ID, PAD_ID, Vocabulary, tokenize

PT = "PT"
FT = "FT"
LM = "LM"
MODES = (PT, FT, LM)

INIT_STRATEGIES = (
    "random",
    "label_init",
    "vocab_sampling",
    "top1000_sampling",
    "task_related_sampling",
    "from_pretrained",
)

RANDOM_PROMPT_STD = 0.5
_NORM_EPS = 1e-6
_MASK_FILL = -1e9

PROMPT_MAGIC = b"PPT1"


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers_enc: int = 2
    n_layers_dec: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_len: int = 512
    vocab_size: int = 2048
    dtype: str = "float32"

    def __post_init__(self) -> None:
        for name in ("d_model", "n_layers_enc", "n_layers_dec", "n_heads", "d_ff", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"invalid config: {name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError("invalid config: d_model not divisible by n_heads")
        if self.vocab_size < 5:
            raise ValueError("invalid config: vocab_size must cover the special tokens")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("invalid config: dtype must be float32 or float64")


@dataclass
class ModelParams:
    """Backbone weights. Under PT every entry is frozen; under FT all are
    tunable. Stored as a flat name -> array mapping."""

    config: ModelConfig
    weights: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.weights.items()})

    def census(self) -> int:
        return sum(int(v.size) for v in self.weights.values())

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.weights):
            h.update(name.encode())
            h.update(self.weights[name].tobytes())
        return h.hexdigest()


@dataclass
class SoftPrompt:
    """k x d_model matrix of learnable prompt embeddings; the only tunable
    parameters under prompt tuning."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2:
            raise ValueError("prompt matrix must be 2-dimensional")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("prompt matrix must be finite")

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def copy(self) -> "SoftPrompt":
        return SoftPrompt(self.matrix.copy())


@dataclass
class Grads:
    prompt: np.ndarray | None = None
    params: dict[str, np.ndarray] | None = None


def _enc_names(i: int) -> list[str]:
    p = f"enc{i}."
    return [p + s for s in ("ln1", "wq", "wk", "wv", "wo", "ln2", "w1", "w2")]


def _dec_names(i: int) -> list[str]:
    p = f"dec{i}."
    return [
        p + s
        for s in ("ln1", "wq", "wk", "wv", "wo", "ln2", "cq", "ck", "cv", "co", "ln3", "w1", "w2")
    ]


def init_model(config: ModelConfig, seed: int) -> ModelParams:
    """Scaled-normal initialization, deterministic per seed: matrices use
    std fan_in**-0.5, embeddings unit std, norm gains start at one."""
    rng = np.random.default_rng(seed)
    dt = np.dtype(config.dtype)
    d, dff, v = config.d_model, config.d_ff, config.vocab_size

    def mat(n_in: int, n_out: int) -> np.ndarray:
        return (rng.standard_normal((n_in, n_out)) * n_in**-0.5).astype(dt)

    weights: dict[str, np.ndarray] = {}
    weights["emb"] = rng.standard_normal((v, d)).astype(dt)
    weights["w_out"] = mat(d, v)
    for i in range(config.n_layers_enc):
        p = f"enc{i}."
        weights[p + "ln1"] = np.ones(d, dtype=dt)
        for name in ("wq", "wk", "wv", "wo"):
            weights[p + name] = mat(d, d)
        weights[p + "ln2"] = np.ones(d, dtype=dt)
        weights[p + "w1"] = mat(d, dff)
        weights[p + "w2"] = mat(dff, d)
    for i in range(config.n_layers_dec):
        p = f"dec{i}."
        weights[p + "ln1"] = np.ones(d, dtype=dt)
        for name in ("wq", "wk", "wv", "wo"):
            weights[p + name] = mat(d, d)
        weights[p + "ln2"] = np.ones(d, dtype=dt)
        for name in ("cq", "ck", "cv", "co"):
            weights[p + name] = mat(d, d)
        weights[p + "ln3"] = np.ones(d, dtype=dt)
        weights[p + "w1"] = mat(d, dff)
        weights[p + "w2"] = mat(dff, d)
    weights["enc_ln"] = np.ones(d, dtype=dt)
    weights["dec_ln"] = np.ones(d, dtype=dt)
    return ModelParams(config, weights)


def _sinusoid_table(max_len: int, d: int, dt: np.dtype) -> np.ndarray:
    pos = np.arange(max_len)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (i // 2 * 2) / d)
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(dt)


_PE_CACHE: dict[tuple[int, int, str], np.ndarray] = {}


def _positions(max_len: int, d: int, dtype: str) -> np.ndarray:
    key = (max_len, d, dtype)
    if key not in _PE_CACHE:
        _PE_CACHE[key] = _sinusoid_table(max_len, d, np.dtype(dtype))
    return _PE_CACHE[key]


# ---------------------------------------------------------------------------
# forward / backward primitives
# ---------------------------------------------------------------------------


def _rmsnorm_fwd(x: np.ndarray, g: np.ndarray):
    r = np.sqrt(np.mean(np.square(x), axis=-1, keepdims=True) + _NORM_EPS)
    xhat = x / r
    return xhat * g, (xhat, r)


def _rmsnorm_bwd(dy: np.ndarray, g: np.ndarray, cache, need_g: bool):
    xhat, r = cache
    dxhat = dy * g
    dx = (dxhat - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)) / r
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1))) if need_g else None
    return dx, dg


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, l, d = x.shape
    return x.reshape(b, l, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)


def _attention_fwd(xq, xkv, wq, wk, wv, wo, n_heads, bias):
    """bias is an additive mask broadcastable to [B, 1, Lq, Lk] (or None)."""
    q = _split_heads(xq @ wq, n_heads)
    k = _split_heads(xkv @ wk, n_heads)
    v = _split_heads(xkv @ wv, n_heads)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    if bias is not None:
        scores = scores + bias
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    ctx = _merge_heads(attn @ v)
    out = ctx @ wo
    return out, (xq, xkv, q, k, v, attn, ctx, scale)


def _attention_bwd(dout, wq, wk, wv, wo, n_heads, cache, need_w: bool):
    xq, xkv, q, k, v, attn, ctx, scale = cache
    b, lq, d = xq.shape
    dctx = dout @ wo.T
    dwo = ctx.reshape(-1, d).T @ dout.reshape(-1, d) if need_w else None
    dctx_h = _split_heads(dctx, n_heads)
    dattn = dctx_h @ v.transpose(0, 1, 3, 2)
    dv = attn.transpose(0, 1, 3, 2) @ dctx_h
    dscores = attn * (dattn - np.sum(dattn * attn, axis=-1, keepdims=True))
    dq = (dscores @ k) * scale
    dk = (dscores.transpose(0, 1, 3, 2) @ q) * scale
    dq_m, dk_m, dv_m = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
    dxq = dq_m @ wq.T
    dxkv = dk_m @ wk.T + dv_m @ wv.T
    if need_w:
        dwq = xq.reshape(-1, d).T @ dq_m.reshape(-1, d)
        dwk = xkv.reshape(-1, d).T @ dk_m.reshape(-1, d)
        dwv = xkv.reshape(-1, d).T @ dv_m.reshape(-1, d)
    else:
        dwq = dwk = dwv = None
    return dxq, dxkv, dwq, dwk, dwv, dwo


def _ffn_fwd(x, w1, w2):
    a = x @ w1
    h = np.maximum(a, 0.0)
    return h @ w2, (x, a, h)


def _ffn_bwd(dy, w1, w2, cache, need_w: bool):
    x, a, h = cache
    d, dff = w1.shape
    dh = dy @ w2.T
    da = dh * (a > 0)
    dx = da @ w1.T
    if need_w:
        dw2 = h.reshape(-1, dff).T @ dy.reshape(-1, d)
        dw1 = x.reshape(-1, d).T @ da.reshape(-1, dff)
    else:
        dw1 = dw2 = None
    return dx, dw1, dw2


# ---------------------------------------------------------------------------
# full model forward / backward
# ---------------------------------------------------------------------------


def _forward(params: ModelParams, prompt_mat: np.ndarray | None, ids: np.ndarray, dec_in: np.ndarray):
    """Run the full network; returns logits [B, T, V] and the cache needed
    for the backward pass. `ids` may contain PAD; PAD keys are masked out
    of encoder self-attention and decoder cross-attention."""
    cfg = params.config
    w = params.weights
    dt = np.dtype(cfg.dtype)
    b, l = ids.shape
    k = 0 if prompt_mat is None else prompt_mat.shape[0]
    if k + l > cfg.max_len:
        raise ValueError("sequence too long")

    pe = _positions(cfg.max_len, cfg.d_model, cfg.dtype)
    tok = w["emb"][ids] + pe[:l]
    if k:
        x = np.concatenate([np.broadcast_to(prompt_mat, (b, k, cfg.d_model)), tok], axis=1)
    else:
        x = tok

    key_valid = np.concatenate(
        [np.ones((b, k), dtype=bool), ids != PAD_ID], axis=1
    )
    enc_bias = np.where(key_valid[:, None, None, :], 0.0, _MASK_FILL).astype(dt)

    cache: dict = {"ids": ids, "dec_in": dec_in, "k": k, "b": b, "l": l}
    enc_caches = []
    for i in range(cfg.n_layers_enc):
        p = f"enc{i}."
        h1, c_ln1 = _rmsnorm_fwd(x, w[p + "ln1"])
        attn, c_att = _attention_fwd(
            h1, h1, w[p + "wq"], w[p + "wk"], w[p + "wv"], w[p + "wo"], cfg.n_heads, enc_bias
        )
        x1 = x + attn
        h2, c_ln2 = _rmsnorm_fwd(x1, w[p + "ln2"])
        ff, c_ff = _ffn_fwd(h2, w[p + "w1"], w[p + "w2"])
        x = x1 + ff
        enc_caches.append((c_ln1, c_att, c_ln2, c_ff))
    enc_out, c_encln = _rmsnorm_fwd(x, w["enc_ln"])

    t = dec_in.shape[1]
    y = w["emb"][dec_in] + pe[:t]
    causal = np.triu(np.full((t, t), _MASK_FILL, dtype=dt), k=1)[None, None]
    cross_bias = enc_bias

    dec_caches = []
    for i in range(cfg.n_layers_dec):
        p = f"dec{i}."
        h1, c_ln1 = _rmsnorm_fwd(y, w[p + "ln1"])
        attn, c_satt = _attention_fwd(
            h1, h1, w[p + "wq"], w[p + "wk"], w[p + "wv"], w[p + "wo"], cfg.n_heads, causal
        )
        y1 = y + attn
        h2, c_ln2 = _rmsnorm_fwd(y1, w[p + "ln2"])
        cross, c_catt = _attention_fwd(
            h2, enc_out, w[p + "cq"], w[p + "ck"], w[p + "cv"], w[p + "co"], cfg.n_heads, cross_bias
        )
        y2 = y1 + cross
        h3, c_ln3 = _rmsnorm_fwd(y2, w[p + "ln3"])
        ff, c_ff = _ffn_fwd(h3, w[p + "w1"], w[p + "w2"])
        y = y2 + ff
        dec_caches.append((c_ln1, c_satt, c_ln2, c_catt, c_ln3, c_ff))
    dec_out, c_decln = _rmsnorm_fwd(y, w["dec_ln"])
    logits = dec_out @ w["w_out"]

    cache.update(
        enc_caches=enc_caches,
        c_encln=c_encln,
        dec_caches=dec_caches,
        c_decln=c_decln,
        dec_out=dec_out,
        enc_out=enc_out,
    )
    return logits, cache


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _backward(params: ModelParams, dlogits: np.ndarray, cache, need_params: bool):
    cfg = params.config
    w = params.weights
    dparams: dict[str, np.ndarray] = {} if need_params else None

    def put(name, val):
        if need_params:
            dparams[name] = val

    d = cfg.d_model
    dec_out = cache["dec_out"]
    put("w_out", dec_out.reshape(-1, d).T @ dlogits.reshape(-1, dlogits.shape[-1]))
    dy = dlogits @ w["w_out"].T
    dy, dg = _rmsnorm_bwd(dy, w["dec_ln"], cache["c_decln"], need_params)
    put("dec_ln", dg)

    denc_out = np.zeros_like(cache["enc_out"])
    for i in reversed(range(cfg.n_layers_dec)):
        p = f"dec{i}."
        c_ln1, c_satt, c_ln2, c_catt, c_ln3, c_ff = cache["dec_caches"][i]
        dff, dw1, dw2 = _ffn_bwd(dy, w[p + "w1"], w[p + "w2"], c_ff, need_params)
        put(p + "w1", dw1)
        put(p + "w2", dw2)
        dh3, dg3 = _rmsnorm_bwd(dff, w[p + "ln3"], c_ln3, need_params)
        put(p + "ln3", dg3)
        dy2 = dy + dh3
        dxq, dxkv, dwq, dwk, dwv, dwo = _attention_bwd(
            dy2, w[p + "cq"], w[p + "ck"], w[p + "cv"], w[p + "co"], cfg.n_heads, c_catt, need_params
        )
        put(p + "cq", dwq)
        put(p + "ck", dwk)
        put(p + "cv", dwv)
        put(p + "co", dwo)
        denc_out += dxkv
        dh2, dg2 = _rmsnorm_bwd(dxq, w[p + "ln2"], c_ln2, need_params)
        put(p + "ln2", dg2)
        dy1 = dy2 + dh2
        dxq, dxkv, dwq, dwk, dwv, dwo = _attention_bwd(
            dy1, w[p + "wq"], w[p + "wk"], w[p + "wv"], w[p + "wo"], cfg.n_heads, c_satt, need_params
        )
        put(p + "wq", dwq)
        put(p + "wk", dwk)
        put(p + "wv", dwv)
        put(p + "wo", dwo)
        dh1, dg1 = _rmsnorm_bwd(dxq + dxkv, w[p + "ln1"], c_ln1, need_params)
        put(p + "ln1", dg1)
        dy = dy1 + dh1

    if need_params:
        demb = np.zeros_like(w["emb"])
        np.add.at(demb, cache["dec_in"], dy)

    dx, dg = _rmsnorm_bwd(denc_out, w["enc_ln"], cache["c_encln"], need_params)
    put("enc_ln", dg)
    for i in reversed(range(cfg.n_layers_enc)):
        p = f"enc{i}."
        c_ln1, c_att, c_ln2, c_ff = cache["enc_caches"][i]
        dff, dw1, dw2 = _ffn_bwd(dx, w[p + "w1"], w[p + "w2"], c_ff, need_params)
        put(p + "w1", dw1)
        put(p + "w2", dw2)
        dh2, dg2 = _rmsnorm_bwd(dff, w[p + "ln2"], c_ln2, need_params)
        put(p + "ln2", dg2)
        dx1 = dx + dh2
        dxq, dxkv, dwq, dwk, dwv, dwo = _attention_bwd(
            dx1, w[p + "wq"], w[p + "wk"], w[p + "wv"], w[p + "wo"], cfg.n_heads, c_att, need_params
        )
        put(p + "wq", dwq)
        put(p + "wk", dwk)
        put(p + "wv", dwv)
        put(p + "wo", dwo)
        dh1, dg1 = _rmsnorm_bwd(dxq + dxkv, w[p + "ln1"], c_ln1, need_params)
        put(p + "ln1", dg1)
        dx = dx1 + dh1

    k = cache["k"]
    dprompt = dx[:, :k, :].sum(axis=0) if k else None
    if need_params:
        np.add.at(demb, cache["ids"], dx[:, k:, :])
        dparams["emb"] = demb
    return dprompt, dparams


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _pad_batch(seqs: Sequence[Sequence[int]], dtype=np.int64) -> np.ndarray:
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), PAD_ID, dtype=dtype)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


def _check_inputs(params: ModelParams, ids: Sequence[int], mask_position: int) -> None:
    if not 0 <= mask_position < len(ids):
        raise ValueError("mask_position out of range")
    if ids[mask_position] != MASK_ID:
        raise ValueError("mask_position does not index a mask token")
    if any(t < 0 or t >= params.config.vocab_size for t in ids):
        raise ValueError("token id out of vocabulary")


def forward_mask_distribution(
    params: ModelParams,
    prompt: SoftPrompt | None,
    input_ids: Sequence[int],
    mask_position: int,
) -> np.ndarray:
    """Vocabulary distribution at the masked position of one input."""
    _check_inputs(params, input_ids, mask_position)
    mat = prompt.matrix if prompt is not None else None
    ids = np.asarray([input_ids], dtype=np.int64)
    dec_in = np.asarray([[MASK_ID]], dtype=np.int64)
    logits, _ = _forward(params, mat, ids, dec_in)
    return _softmax(logits[0, 0].astype(np.float64))


def forward_batch_distribution(
    params: ModelParams,
    prompt: SoftPrompt | None,
    batch: Sequence[tuple[Sequence[int], int]],
) -> np.ndarray:
    """Mask-position distributions for a batch of (input_ids, mask_position)."""
    for ids, pos in batch:
        _check_inputs(params, ids, pos)
    mat = prompt.matrix if prompt is not None else None
    ids = _pad_batch([ids for ids, _ in batch])
    dec_in = np.full((len(batch), 1), MASK_ID, dtype=np.int64)
    logits, _ = _forward(params, mat, ids, dec_in)
    return _softmax(logits[:, 0].astype(np.float64))


def span_corrupt(
    seq: Sequence[int], rng: np.random.Generator, max_span: int = 3
) -> tuple[list[int], int, list[int]]:
    """Replace one random 1..max_span token span with the mask sentinel.
    Returns (corrupted ids, mask position, span target ids)."""
    n = len(seq)
    if n < 2:
        raise ValueError("sequence too short for span corruption")
    span = int(rng.integers(1, min(max_span, n - 1) + 1))
    start = int(rng.integers(0, n - span + 1))
    corrupted = list(seq[:start]) + [MASK_ID] + list(seq[start + span :])
    return corrupted, start, list(seq[start : start + span])


def loss_and_grad(
    params: ModelParams,
    prompt: SoftPrompt | None,
    batch: Sequence,
    mode: str,
    rng: np.random.Generator | None = None,
) -> tuple[float, Grads]:
    """Mean negative log-likelihood and gradients for one batch.

    PT mode: batch items are (input_ids, mask_position, target_id); only
    the prompt gradient is produced, backbone gradients are absent.
    FT mode: same items; backbone gradients are produced (plus the prompt's
    if one is attached).
    LM mode: batch items are raw token sequences; each is corrupted with a
    single masked span of 1..3 tokens drawn from `rng`, and the decoder is
    teacher-forced over the span tokens.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if len(batch) == 0:
        raise ValueError("empty batch")
    if mode == PT and prompt is None:
        raise ValueError("PT mode requires a soft prompt")

    if mode == LM:
        if rng is None:
            raise ValueError("LM mode requires a generator for span corruption")
        triples = []
        for seq in batch:
            corrupted, pos, targets = span_corrupt(seq, rng)
            triples.append((corrupted, pos, targets))
    else:
        triples = [(list(ids), pos, [int(tgt)]) for ids, pos, tgt in batch]

    v = params.config.vocab_size
    for ids, pos, targets in triples:
        _check_inputs(params, ids, pos)
        if any(t < 0 or t >= v for t in targets):
            raise ValueError("target id out of vocabulary")

    mat = prompt.matrix if prompt is not None else None
    ids = _pad_batch([ids for ids, _, _ in triples])
    t_max = max(len(t) for _, _, t in triples)
    dec_in = np.full((len(triples), t_max), PAD_ID, dtype=np.int64)
    targets = np.full((len(triples), t_max), PAD_ID, dtype=np.int64)
    tmask = np.zeros((len(triples), t_max), dtype=bool)
    for i, (_, _, tgt) in enumerate(triples):
        dec_in[i, 0] = MASK_ID
        dec_in[i, 1 : len(tgt)] = tgt[:-1]
        targets[i, : len(tgt)] = tgt
        tmask[i, : len(tgt)] = True

    logits, cache = _forward(params, mat, ids, dec_in)
    probs = _softmax(logits)
    n_valid = int(tmask.sum())
    rows = np.where(tmask)
    picked = probs[rows[0], rows[1], targets[tmask]]
    loss = float(-np.log(np.maximum(picked, 1e-30)).sum() / n_valid)

    dlogits = probs
    dlogits[rows[0], rows[1], targets[tmask]] -= 1.0
    dlogits *= tmask[:, :, None] / n_valid
    dlogits = dlogits.astype(np.dtype(params.config.dtype))

    need_params = mode in (FT, LM)
    dprompt, dparams = _backward(params, dlogits, cache, need_params)
    if mode == PT:
        return loss, Grads(prompt=dprompt, params=None)
    return loss, Grads(prompt=dprompt if prompt is not None else None, params=dparams)


def count_tunable(params: ModelParams | None, prompt: SoftPrompt | None, mode: str) -> int:
    """Number of tunable parameters: the prompt alone under PT, the
    backbone census (plus any attached prompt) under FT/LM."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == PT:
        if prompt is None:
            raise ValueError("PT mode requires a soft prompt")
        return int(prompt.matrix.size)
    if params is None:
        raise ValueError(f"{mode} mode requires model parameters")
    total = params.census()
    if prompt is not None:
        total += int(prompt.matrix.size)
    return total


# ---------------------------------------------------------------------------
# soft prompt initialization
# ---------------------------------------------------------------------------


def init_soft_prompt(
    strategy: str,
    *,
    k: int,
    d_model: int | None = None,
    seed: int = 0,
    params: ModelParams | None = None,
    vocab: Vocabulary | None = None,
    verbalizer=None,
    rank_tokens: Sequence[str] | None = None,
    texts: Sequence[str] | None = None,
    checkpoint: str | Path | None = None,
) -> SoftPrompt:
    """Build a k x d prompt by one of the initialization strategies.

    random draws entries from N(0, 0.5^2); the word-based strategies copy
    embedding rows of chosen words (label words are cycled to fill k);
    from_pretrained loads a checkpoint file verbatim.
    """
    if strategy not in INIT_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = np.random.default_rng(seed)

    if strategy == "from_pretrained":
        if checkpoint is None:
            raise ValueError("from_pretrained requires a checkpoint path")
        prompt = load_prompt(checkpoint)
        if prompt.k != k or (d_model is not None and prompt.d != d_model):
            raise ValueError("prompt shape mismatch")
        return prompt

    if strategy == "random":
        if d_model is None:
            raise ValueError("random init requires d_model")
        mat = rng.standard_normal((k, d_model)) * RANDOM_PROMPT_STD
        return SoftPrompt(mat.astype(np.float32))

    if params is None or vocab is None:
        raise ValueError(f"{strategy} requires model parameters and a vocabulary")
    emb = params.weights["emb"]

    if strategy == "label_init":
        if verbalizer is None:
            raise ValueError("label_init requires a verbalizer")
        ids = [vocab.id_of(tok) for tok in verbalizer.tokens]
        rows = [ids[i % len(ids)] for i in range(k)]
    else:
        if strategy == "vocab_sampling":
            pool = list(range(4, len(vocab)))
        elif strategy == "top1000_sampling":
            if rank_tokens is None:
                raise ValueError("top1000_sampling requires corpus frequency ranks")
            pool = [vocab.id_of(t) for t in rank_tokens[:1000] if t in vocab]
        else:
            if texts is None:
                raise ValueError("task_related_sampling requires downstream texts")
            seen = {tok for text in texts for tok in tokenize(text)}
            pool = sorted(vocab.id_of(t) for t in seen if t in vocab)
        if not pool:
            raise ValueError(f"{strategy} has no candidate words")
        rows = rng.choice(pool, size=k, replace=len(pool) < k).tolist()

    return SoftPrompt(emb[np.asarray(rows, dtype=np.int64)].astype(np.float32).copy())


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_prompt(prompt: SoftPrompt, path: str | Path) -> None:
    """16-byte header (magic "PPT1", k and d as little-endian uint32, four
    reserved zero bytes) followed by k*d little-endian float32 values in
    row-major order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = PROMPT_MAGIC + struct.pack("<II4x", prompt.k, prompt.d)
    payload = np.ascontiguousarray(prompt.matrix, dtype="<f4").tobytes()
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(header + payload)
    tmp.replace(path)


def load_prompt(path: str | Path) -> SoftPrompt:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != PROMPT_MAGIC:
        raise ValueError("not a prompt checkpoint")
    k, d = struct.unpack("<II", raw[4:12])
    if raw[12:16] != b"\x00\x00\x00\x00":
        raise ValueError("corrupt prompt checkpoint header")
    expected = 16 + 4 * k * d
    if len(raw) != expected:
        raise ValueError("prompt payload size mismatch")
    mat = np.frombuffer(raw[16:], dtype="<f4").reshape(k, d).astype(np.float32)
    return SoftPrompt(mat)


def save_model(params: ModelParams, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = json.dumps(params.config.__dict__, sort_keys=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "wb") as f:
        np.savez(f, __config__=np.frombuffer(cfg.encode(), dtype=np.uint8), **params.weights)
    tmp.replace(path)


def load_model(path: str | Path) -> ModelParams:
    with np.load(path) as data:
        cfg = ModelConfig(**json.loads(bytes(data["__config__"]).decode()))
        weights = {k: data[k].copy() for k in data.files if k != "__config__"}
    return ModelParams(cfg, weights)
