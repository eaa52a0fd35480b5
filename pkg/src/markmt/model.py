"""A small attention-based encoder-decoder over token ids, in numpy.

Single-layer GRU encoder and decoder with dot-product attention: the
per-step target distribution is softmax(W_out tanh(W_att [s_t; c_t])),
where s_t is the decoder state and c_t the attention context over encoder
states.  The hand-written backward pass gives exact gradients of the
token-weighted log-likelihood sum_t delta_t * log p(y_t | x, y_<t), which
is everything the training objectives need.

Conventions: sequences are 1-D integer arrays; the decoder is fed BOS and
trained to emit the target tokens followed by EOS.  `forward` and
`sequence_log_prob` take a BOS-led prefix / BOS...EOS-wrapped sequence,
while `backward` and the decoders work with the predicted tokens (surface
tokens plus EOS, no BOS).  All computation is f64 by default and fully
deterministic given the seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import BOS, EOS, Vocabulary

TENSOR_NAMES = (
    "E_src", "E_trg",
    "W_enc", "U_enc", "b_enc",
    "W_dec", "U_dec", "b_dec",
    "W_att", "b_att",
    "W_out", "b_out",
)

INIT_SCALE = 0.08


@dataclass(frozen=True)
class ModelConfig:
    src_vocab_size: int
    trg_vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    seed: int = 0
    precision: str = "f64"

    def __post_init__(self) -> None:
        for name in ("src_vocab_size", "trg_vocab_size", "embed_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.precision not in ("f32", "f64"):
            raise ValueError("precision must be 'f32' or 'f64'")

    @property
    def dtype(self) -> type:
        return np.float64 if self.precision == "f64" else np.float32


@dataclass
class ModelParams:
    """All trainable tensors plus the configuration that shaped them."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def assert_finite(self) -> None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise FloatingPointError(f"non-finite values in tensor {name}")


def init_params(config: ModelConfig) -> ModelParams:
    """Seeded uniform initialization in [-0.08, 0.08]."""
    rng = np.random.default_rng(config.seed)
    d_e, d_h = config.embed_dim, config.hidden_dim
    shapes = {
        "E_src": (config.src_vocab_size, d_e),
        "E_trg": (config.trg_vocab_size, d_e),
        "W_enc": (d_e, 3 * d_h),
        "U_enc": (d_h, 3 * d_h),
        "b_enc": (3 * d_h,),
        "W_dec": (d_e, 3 * d_h),
        "U_dec": (d_h, 3 * d_h),
        "b_dec": (3 * d_h,),
        "W_att": (2 * d_h, d_h),
        "b_att": (d_h,),
        "W_out": (d_h, config.trg_vocab_size),
        "b_out": (config.trg_vocab_size,),
    }
    tensors = {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(config.dtype)
        for name, shape in shapes.items()
    }
    return ModelParams(config=config, tensors=tensors)


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def _check_ids(ids: Sequence[int], size: int, what: str) -> np.ndarray:
    arr = np.asarray(ids, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be a 1-D id sequence")
    if arr.size and (arr.min() < 0 or arr.max() >= size):
        raise ValueError(f"{what} ids out of range for vocabulary of size {size}")
    return arr


def _gru_step(x, h_prev, W, U, b, d_h):
    """One GRU step; returns (h, cache-for-backward)."""
    pre = x @ W + b
    pre_zr = pre[: 2 * d_h] + h_prev @ U[:, : 2 * d_h]
    z = _sigmoid(pre_zr[:d_h])
    r = _sigmoid(pre_zr[d_h:])
    rh = r * h_prev
    n = np.tanh(pre[2 * d_h :] + rh @ U[:, 2 * d_h :])
    h = (1.0 - z) * n + z * h_prev
    return h, (x, h_prev, z, r, rh, n)


def _gru_backward(dh, cache, W, U, dW, dU, db, d_h):
    """Backprop one GRU step; returns (dx, dh_prev)."""
    x, h_prev, z, r, rh, n = cache
    dz = dh * (h_prev - n)
    dn = dh * (1.0 - z)
    dh_prev = dh * z

    dpre_n = dn * (1.0 - n * n)
    dW[:, 2 * d_h :] += np.outer(x, dpre_n)
    dU[:, 2 * d_h :] += np.outer(rh, dpre_n)
    db[2 * d_h :] += dpre_n
    drh = dpre_n @ U[:, 2 * d_h :].T
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r

    dpre_z = dz * z * (1.0 - z)
    dpre_r = dr * r * (1.0 - r)
    dpre_zr = np.concatenate([dpre_z, dpre_r])
    dW[:, : 2 * d_h] += np.outer(x, dpre_zr)
    dU[:, : 2 * d_h] += np.outer(h_prev, dpre_zr)
    db[: 2 * d_h] += dpre_zr
    dh_prev = dh_prev + dpre_zr @ U[:, : 2 * d_h].T

    dx = dpre_n @ W[:, 2 * d_h :].T + dpre_zr @ W[:, : 2 * d_h].T
    return dx, dh_prev


def encode(params: ModelParams, x: Sequence[int]) -> np.ndarray:
    """Encoder hidden states, shape (S, hidden_dim)."""
    cfg = params.config
    x = _check_ids(x, cfg.src_vocab_size, "source")
    if x.size == 0:
        raise ValueError("source must be non-empty")
    t = params.tensors
    d_h = cfg.hidden_dim
    H = np.zeros((len(x), d_h), dtype=cfg.dtype)
    h = np.zeros(d_h, dtype=cfg.dtype)
    for s, tok in enumerate(x):
        h, _ = _gru_step(t["E_src"][tok], h, t["W_enc"], t["U_enc"], t["b_enc"], d_h)
        H[s] = h
    return H


def _decoder_step(params: ModelParams, H: np.ndarray, s_prev: np.ndarray, y_prev: int):
    """One decoder step given the previous state and previous target token.

    Returns (log_probs, s_new).  The decoder state is initialized with the
    last encoder state; attention scores are plain dot products.
    """
    cfg = params.config
    t = params.tensors
    d_h = cfg.hidden_dim
    s_new, _ = _gru_step(
        t["E_trg"][y_prev], s_prev, t["W_dec"], t["U_dec"], t["b_dec"], d_h
    )
    scores = H @ s_new
    scores = scores - scores.max()
    alpha = np.exp(scores)
    alpha /= alpha.sum()
    c = alpha @ H
    o = np.tanh(np.concatenate([s_new, c]) @ t["W_att"] + t["b_att"])
    logits = o @ t["W_out"] + t["b_out"]
    return _log_softmax(logits), s_new


def forward(
    params: ModelParams, x: Sequence[int], y_prefix: Sequence[int]
) -> np.ndarray:
    """Per-step target log-probabilities for every position of y_prefix.

    y_prefix must begin with BOS; row t is the distribution over the token
    following y_prefix[:t+1], so the output has shape (len(y_prefix), V_trg)
    and each row's probabilities sum to one.
    """
    cfg = params.config
    y_prefix = _check_ids(y_prefix, cfg.trg_vocab_size, "target prefix")
    if y_prefix.size == 0 or y_prefix[0] != BOS:
        raise ValueError("y_prefix must begin with BOS")
    H = encode(params, x)
    s = H[-1]
    out = np.zeros((len(y_prefix), cfg.trg_vocab_size), dtype=cfg.dtype)
    for i, tok in enumerate(y_prefix):
        out[i], s = _decoder_step(params, H, s, int(tok))
    return out


def sequence_log_prob(params: ModelParams, x: Sequence[int], y: Sequence[int]) -> float:
    """log p(y | x) for a sequence y wrapped in BOS ... EOS."""
    y = _check_ids(y, params.config.trg_vocab_size, "target")
    if len(y) < 2 or y[0] != BOS or y[-1] != EOS:
        raise ValueError("y must be wrapped in BOS ... EOS")
    logps = forward(params, x, y[:-1])
    return float(sum(logps[i, y[i + 1]] for i in range(len(y) - 1)))


def backward(
    params: ModelParams,
    x: Sequence[int],
    y: Sequence[int],
    step_weights: Sequence[float],
) -> dict[str, np.ndarray]:
    """Exact gradient of sum_t delta_t * log p(y_t | x, y_<t).

    y holds the predicted tokens (surface plus EOS, no BOS); step_weights
    aligns with it one-for-one.  Returns one gradient array per tensor.
    """
    cfg = params.config
    t = params.tensors
    d_h = cfg.hidden_dim
    x = _check_ids(x, cfg.src_vocab_size, "source")
    y = _check_ids(y, cfg.trg_vocab_size, "target")
    w = np.asarray(step_weights, dtype=cfg.dtype)
    if w.shape != (len(y),):
        raise ValueError("step_weights must align with y one-for-one")
    if x.size == 0 or y.size == 0:
        raise ValueError("x and y must be non-empty")

    # forward with caches
    S, T = len(x), len(y)
    enc_caches = []
    H = np.zeros((S, d_h), dtype=cfg.dtype)
    h = np.zeros(d_h, dtype=cfg.dtype)
    for s_i, tok in enumerate(x):
        h, cache = _gru_step(t["E_src"][tok], h, t["W_enc"], t["U_enc"], t["b_enc"], d_h)
        enc_caches.append(cache)
        H[s_i] = h

    y_in = np.concatenate([[BOS], y[:-1]])
    dec_caches = []
    att_caches = []
    s_state = H[-1]
    probs = np.zeros((T, cfg.trg_vocab_size), dtype=cfg.dtype)
    for i in range(T):
        s_state, cache = _gru_step(
            t["E_trg"][y_in[i]], s_state, t["W_dec"], t["U_dec"], t["b_dec"], d_h
        )
        dec_caches.append(cache)
        scores = H @ s_state
        scores = scores - scores.max()
        alpha = np.exp(scores)
        alpha /= alpha.sum()
        c = alpha @ H
        sc = np.concatenate([s_state, c])
        o = np.tanh(sc @ t["W_att"] + t["b_att"])
        logits = o @ t["W_out"] + t["b_out"]
        lp = _log_softmax(logits)
        probs[i] = np.exp(lp)
        att_caches.append((alpha, c, o, sc))

    grads = zero_grads(params)
    dH = np.zeros_like(H)
    ds_next = np.zeros(d_h, dtype=cfg.dtype)

    for i in range(T - 1, -1, -1):
        alpha, c, o, sc = att_caches[i]
        # d/dlogits of w_i * log p(y_i) = w_i * (onehot(y_i) - p)
        dlogits = -w[i] * probs[i]
        dlogits[y[i]] += w[i]
        grads["W_out"] += np.outer(o, dlogits)
        grads["b_out"] += dlogits
        do = dlogits @ t["W_out"].T
        dpre_att = do * (1.0 - o * o)
        grads["W_att"] += np.outer(sc, dpre_att)
        grads["b_att"] += dpre_att
        dsc = dpre_att @ t["W_att"].T
        ds = dsc[:d_h] + ds_next
        dc = dsc[d_h:]

        # attention: c = alpha @ H, scores = H @ s
        dalpha = H @ dc
        dscores = alpha * (dalpha - float(alpha @ dalpha))
        ds = ds + dscores @ H
        dH += np.outer(dscores, _dec_state_of(dec_caches, i))
        dH += np.outer(alpha, dc)

        dg, ds_next = _gru_backward(
            ds, dec_caches[i], t["W_dec"], t["U_dec"],
            grads["W_dec"], grads["U_dec"], grads["b_dec"], d_h,
        )
        grads["E_trg"][y_in[i]] += dg

    # decoder initial state is the last encoder state
    dH[-1] += ds_next

    dh_next = np.zeros(d_h, dtype=cfg.dtype)
    for s_i in range(S - 1, -1, -1):
        dh = dH[s_i] + dh_next
        de, dh_next = _gru_backward(
            dh, enc_caches[s_i], t["W_enc"], t["U_enc"],
            grads["W_enc"], grads["U_enc"], grads["b_enc"], d_h,
        )
        grads["E_src"][x[s_i]] += de
    return grads


def _dec_state_of(dec_caches, i):
    """Decoder state s_i recovered from the step-i cache."""
    _, h_prev, z, _, _, n = dec_caches[i]
    return (1.0 - z) * n + z * h_prev


def greedy_decode(params: ModelParams, x: Sequence[int], max_len: int = 0) -> list[int]:
    """Argmax decoding; returns surface token ids (EOS stripped).

    Ties resolve to the lowest token id.  max_len <= 0 means 2*len(x)+5.
    """
    if max_len <= 0:
        max_len = 2 * len(x) + 5
    H = encode(params, x)
    s = H[-1]
    prev = BOS
    out: list[int] = []
    for _ in range(max_len):
        lp, s = _decoder_step(params, H, s, prev)
        tok = int(np.argmax(lp))
        if tok == EOS:
            break
        out.append(tok)
        prev = tok
    return out


def beam_decode(
    params: ModelParams,
    x: Sequence[int],
    width: int = 5,
    length_penalty: float = 1.0,
    max_len: int = 0,
) -> list[int]:
    """Beam search; finished hypotheses score log_prob / length^penalty.

    The candidate pool at each step is every running hypothesis extended by
    every token, ranked by cumulative log-probability (ties prefer the
    lexicographically smaller id sequence); the top `width` survive, and
    those ending in EOS retire to the finished pool.  Length counts the
    predicted tokens including EOS; hypotheses still running at max_len are
    scored on their surface length.  Width 1 therefore reproduces
    greedy_decode exactly.  Returns surface ids.
    """
    ids, _ = _beam_search(params, x, width, length_penalty, max_len)
    return ids


def _beam_search(
    params: ModelParams,
    x: Sequence[int],
    width: int,
    length_penalty: float,
    max_len: int,
) -> tuple[list[int], float]:
    if width < 1:
        raise ValueError("width must be >= 1")
    if length_penalty <= 0:
        raise ValueError("length_penalty must be > 0")
    if max_len <= 0:
        max_len = 2 * len(x) + 5
    H = encode(params, x)
    # (ids, logp, state); finished entries: (score, ids)
    running: list[tuple[tuple[int, ...], float, np.ndarray]] = [((), 0.0, H[-1])]
    finished: list[tuple[float, tuple[int, ...]]] = []
    for _ in range(max_len):
        if not running:
            break
        candidates: list[tuple[float, tuple[int, ...], int, np.ndarray]] = []
        for ids, logp, state in running:
            prev = ids[-1] if ids else BOS
            lp, s_new = _decoder_step(params, H, state, prev)
            for tok in range(params.config.trg_vocab_size):
                candidates.append((logp + float(lp[tok]), ids + (tok,), tok, s_new))
        candidates.sort(key=lambda cand: (-cand[0], cand[1]))
        running = []
        for logp, ids, tok, state in candidates[:width]:
            if tok == EOS:
                finished.append((logp / len(ids) ** length_penalty, ids[:-1]))
            else:
                running.append((ids, logp, state))
    for ids, logp, _ in running:
        finished.append((logp / max(1, len(ids)) ** length_penalty, ids))
    finished.sort(key=lambda f: (-f[0], f[1]))
    return list(finished[0][1]), finished[0][0]


def vocab_fingerprint(vocab: Vocabulary) -> str:
    payload = "\n".join(vocab.id_to_token).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    src_vocab: Vocabulary | None = None,
    trg_vocab: Vocabulary | None = None,
    extra: dict | None = None,
) -> None:
    """Write an .npz checkpoint: named tensors plus a JSON meta record.

    Layout: one array per tensor name, plus `__meta__` holding the JSON
    {config, src_vocab_sha256?, trg_vocab_sha256?, extra?}; stable across
    versions.
    """
    meta = {
        "format": "markmt-checkpoint-v1",
        "config": {
            "src_vocab_size": params.config.src_vocab_size,
            "trg_vocab_size": params.config.trg_vocab_size,
            "embed_dim": params.config.embed_dim,
            "hidden_dim": params.config.hidden_dim,
            "seed": params.config.seed,
            "precision": params.config.precision,
        },
    }
    if src_vocab is not None:
        meta["src_vocab_sha256"] = vocab_fingerprint(src_vocab)
    if trg_vocab is not None:
        meta["trg_vocab_sha256"] = vocab_fingerprint(trg_vocab)
    if extra:
        meta["extra"] = extra
    arrays = dict(params.tensors)
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    np.savez(path, **arrays)


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format") != "markmt-checkpoint-v1":
            raise ValueError(f"unrecognized checkpoint format in {path}")
        config = ModelConfig(**meta["config"])
        tensors = {name: data[name].astype(config.dtype) for name in TENSOR_NAMES}
    return ModelParams(config=config, tensors=tensors), meta
