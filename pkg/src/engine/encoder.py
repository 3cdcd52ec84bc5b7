"""Toy pre-norm causal transformer with two embedding modes.

Sequences follow one instruction protocol:

* direct:    ``x`` where ``x`` = content + ``<d_emb>``
* reasoning: ``x + r + <r_emb>`` where ``r`` is ``[<empty>]`` or
  ``<reason> ... </reason>``

The direct sequence is a causal prefix of the reasoning sequence, so one
forward pass yields the direct embedding, the chain-of-thought log-likelihood
and the reasoning embedding.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from src.engine import autodiff as ad
from src.engine.autodiff import Node
from src.enums.tokens import SpecialToken
from src.errors.core import UsageError
from src.models.config import EncoderConfig
from src.utils.formatters import Formatters
from src.utils.helpers import Helpers


EXTRACTION_POINT = "post_final_norm"
MASK_VALUE = -1e9
GREEDY_TEMPERATURE = 1e-6
GENERATION_CAP = 1024


class EncoderState:
    """Trainable parameters, optimizer moments and step counter."""

    def __init__(
        self,
        config: EncoderConfig,
        params: dict[str, Node],
        first_moment: dict[str, np.ndarray] | None = None,
        second_moment: dict[str, np.ndarray] | None = None,
        step: int = 0,
    ) -> None:
        """Wrap parameters; moments default to zeros."""
        self.config = config
        self.params = params
        self.first_moment = first_moment or {k: np.zeros_like(p.value) for k, p in params.items()}
        self.second_moment = second_moment or {
            k: np.zeros_like(p.value) for k, p in params.items()
        }
        self.step = step

    @property
    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def parameters(self) -> list[Node]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        ad.zero_grad(self.params.values())

    def reset_moments(self) -> None:
        """Fresh optimizer state, parameters untouched."""
        for name, p in self.params.items():
            self.first_moment[name] = np.zeros_like(p.value)
            self.second_moment[name] = np.zeros_like(p.value)
        self.step = 0

    def clone(self) -> "EncoderState":
        """Deep copy, sharing nothing with the original."""
        params = {k: ad.parameter(p.value.copy(), name=k) for k, p in self.params.items()}
        return EncoderState(
            config=self.config.model_copy(deep=True),
            params=params,
            first_moment={k: v.copy() for k, v in self.first_moment.items()},
            second_moment={k: v.copy() for k, v in self.second_moment.items()},
            step=self.step,
        )


@dataclass
class EncodedInstance:
    """Outputs of one fused forward pass."""

    z_direct: Node
    z_reason: Node
    rationale_logprobs: Node | None
    rationale: list[int] = field(default_factory=list)


@dataclass
class SampledRationale:
    """Result of autoregressive generation."""

    tokens: list[int]
    logprobs: list[float]
    truncated: bool


def init_encoder(config: EncoderConfig, seed: int) -> EncoderState:
    """Seeded initialization: scaled normals for weights, unit gains, zero biases."""
    rng = Helpers.rng(seed, "encoder-init")
    d, v, t = config.model_dim, config.vocab_size, config.max_seq_len
    f = config.ffn_multiplier * d

    def normal(shape: tuple[int, ...], std: float) -> np.ndarray:
        return rng.standard_normal(shape) * std

    arrays: dict[str, np.ndarray] = {
        "tok_emb": normal((v, d), 0.5),
        "pos_emb": normal((t, d), 0.1),
    }
    for layer in range(config.layer_count):
        prefix = f"blocks.{layer}"
        arrays[f"{prefix}.ln1.gain"] = np.ones(d)
        arrays[f"{prefix}.ln1.bias"] = np.zeros(d)
        for proj in ("w_q", "w_k", "w_v", "w_o"):
            arrays[f"{prefix}.attn.{proj}"] = normal((d, d), 1.0 / math.sqrt(d))
        arrays[f"{prefix}.ln2.gain"] = np.ones(d)
        arrays[f"{prefix}.ln2.bias"] = np.zeros(d)
        arrays[f"{prefix}.ffn.w_in"] = normal((d, f), 1.0 / math.sqrt(d))
        arrays[f"{prefix}.ffn.b_in"] = np.zeros(f)
        arrays[f"{prefix}.ffn.w_out"] = normal((f, d), 1.0 / math.sqrt(f))
        arrays[f"{prefix}.ffn.b_out"] = np.zeros(d)
    arrays["ln_f.gain"] = np.ones(d)
    arrays["ln_f.bias"] = np.zeros(d)
    arrays["lm_head.weight"] = normal((d, v), 1.0 / math.sqrt(d))
    arrays["lm_head.bias"] = np.zeros(v)
    arrays["proj.weight"] = normal((d, config.embedding_dim), 1.0 / math.sqrt(d))

    params = {name: ad.parameter(value, name=name) for name, value in arrays.items()}
    return EncoderState(config=config, params=params)


def _check_length(state: EncoderState, length: int, what: str) -> None:
    if length > state.config.max_seq_len:
        raise UsageError(
            f"{what} has length {length}, exceeding max_seq_len {state.config.max_seq_len}"
        )


def _check_tokens(state: EncoderState, tokens: Sequence[int]) -> None:
    if not tokens:
        raise UsageError("empty token sequence")
    if min(tokens) < 0 or max(tokens) >= state.config.vocab_size:
        raise UsageError("token id outside the vocabulary")


def _affine_norm(state: EncoderState, x: Node, prefix: str) -> Node:
    p = state.params
    return ad.add_row(ad.mul_row(ad.layer_norm(x), p[f"{prefix}.gain"]), p[f"{prefix}.bias"])


def _causal_mask(heads: int, length: int) -> Node:
    upper = np.triu(np.ones((length, length), dtype=bool), k=1)
    mask = np.where(upper, MASK_VALUE, 0.0)
    return ad.constant(np.broadcast_to(mask, (heads, length, length)).copy())


def _attention(state: EncoderState, h: Node, prefix: str) -> Node:
    cfg = state.config
    length, heads = h.shape[0], cfg.head_count
    head_dim = cfg.model_dim // heads
    p = state.params

    def split_heads(w: str) -> Node:
        projected = ad.matmul(h, p[f"{prefix}.attn.{w}"])
        return ad.transpose(ad.reshape(projected, (length, heads, head_dim)), (1, 0, 2))

    q, k, v = split_heads("w_q"), split_heads("w_k"), split_heads("w_v")
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(head_dim))
    weights = ad.row_softmax(ad.add(scores, _causal_mask(heads, length)))
    mixed = ad.transpose(ad.matmul(weights, v), (1, 0, 2))
    return ad.matmul(ad.reshape(mixed, (length, cfg.model_dim)), p[f"{prefix}.attn.w_o"])


def _feed_forward(state: EncoderState, h: Node, prefix: str) -> Node:
    p = state.params
    inner = ad.tanh(ad.add_row(ad.matmul(h, p[f"{prefix}.ffn.w_in"]), p[f"{prefix}.ffn.b_in"]))
    return ad.add_row(ad.matmul(inner, p[f"{prefix}.ffn.w_out"]), p[f"{prefix}.ffn.b_out"])


def forward_hidden(state: EncoderState, tokens: Sequence[int]) -> Node:
    """Hidden states after the final layer norm, shape (T, model_dim)."""
    tokens = [int(t) for t in tokens]
    _check_tokens(state, tokens)
    _check_length(state, len(tokens), "sequence")
    p = state.params
    x = ad.add(ad.take_rows(p["tok_emb"], tokens), ad.take_rows(p["pos_emb"], range(len(tokens))))
    for layer in range(state.config.layer_count):
        prefix = f"blocks.{layer}"
        x = ad.add(x, _attention(state, _affine_norm(state, x, f"{prefix}.ln1"), prefix))
        x = ad.add(x, _feed_forward(state, _affine_norm(state, x, f"{prefix}.ln2"), prefix))
    return _affine_norm(state, x, "ln_f")


def lm_logits(state: EncoderState, hidden: Node) -> Node:
    """Vocabulary scores for every row of ``hidden``."""
    p = state.params
    return ad.add_row(ad.matmul(hidden, p["lm_head.weight"]), p["lm_head.bias"])


def _extract(state: EncoderState, hidden: Node, position: int) -> Node:
    row = ad.take_rows(hidden, [position])
    projected = ad.matmul(row, state.params["proj.weight"])
    return ad.l2_normalize(ad.reshape(projected, (state.config.embedding_dim,)))


def _require_direct_input(x: Sequence[int]) -> None:
    if not x or int(x[-1]) != SpecialToken.d_emb:
        raise UsageError("input must end with <d_emb>")


def _rationale_logprobs(
    state: EncoderState, hidden: Node, start: int, rationale: Sequence[int]
) -> Node | None:
    """log p(r_i | prefix) for each rationale token; rows start at the <d_emb> position."""
    if not rationale:
        return None
    rows = list(range(start, start + len(rationale)))
    logits = lm_logits(state, ad.take_rows(hidden, rows))
    log_probs = ad.row_log_softmax(logits)
    return ad.pick(log_probs, range(len(rationale)), [int(t) for t in rationale])


def embed_direct(state: EncoderState, x: Sequence[int]) -> Node:
    """Unit embedding read at the trailing <d_emb>."""
    _require_direct_input(x)
    hidden = forward_hidden(state, x)
    return _extract(state, hidden, len(x) - 1)


def encode(state: EncoderState, x: Sequence[int], r: Sequence[int]) -> EncodedInstance:
    """Fused forward over ``x + frame(r) + <r_emb>``."""
    _require_direct_input(x)
    rationale = Formatters.frame_rationale(r)
    sequence = [*x, *rationale, SpecialToken.r_emb.value]
    _check_length(state, len(sequence), "input plus rationale")
    hidden = forward_hidden(state, sequence)
    return EncodedInstance(
        z_direct=_extract(state, hidden, len(x) - 1),
        z_reason=_extract(state, hidden, len(sequence) - 1),
        rationale_logprobs=_rationale_logprobs(state, hidden, len(x) - 1, rationale),
        rationale=rationale,
    )


def embed_with_reasoning(state: EncoderState, x: Sequence[int], r: Sequence[int]) -> Node:
    """Unit embedding read at <r_emb> after the rationale."""
    return encode(state, x, r).z_reason


def token_logprobs(state: EncoderState, x: Sequence[int], r: Sequence[int]) -> Node | None:
    """Per-token log-probabilities of a generated continuation ``r`` after ``x``.

    ``r`` is scored as generated (no framing, no <r_emb>); None when empty.
    """
    if not r:
        return None
    sequence = [*x, *r]
    _check_length(state, len(sequence), "input plus continuation")
    hidden = forward_hidden(state, sequence)
    return _rationale_logprobs(state, hidden, len(x) - 1, r)


def next_token_logits(state: EncoderState, prefix: Sequence[int]) -> np.ndarray:
    """Unnormalized scores for the token following ``prefix``."""
    if not prefix:
        raise UsageError("prefix must be nonempty")
    _check_length(state, len(prefix) + 1, "prefix")
    with ad.no_grad():
        hidden = forward_hidden(state, prefix)
        last = ad.take_rows(hidden, [len(prefix) - 1])
        return lm_logits(state, last).value[0].copy()


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def sample_rationale(
    state: EncoderState,
    x: Sequence[int],
    temperature: float,
    max_new: int,
    seed: int,
    force_first: int | None = None,
) -> SampledRationale:
    """Autoregressive generation after ``x`` until </reason>, <empty> or a limit.

    Temperatures at or below 1e-6 decode greedily. Sampling draws by inverse
    CDF from a Philox stream keyed by ``seed``. Recorded log-probabilities are
    under the untempered policy. ``force_first`` pins the first token.
    """
    _require_direct_input(x)
    if temperature < 0:
        raise UsageError("temperature must be non-negative")
    if not 1 <= max_new <= GENERATION_CAP:
        raise UsageError(f"max_new must be in [1, {GENERATION_CAP}]")
    rng = Helpers.rng(seed, "sample")
    room = state.config.max_seq_len - len(x) - 1  # keep a slot for <r_emb>
    tokens: list[int] = []
    logprobs: list[float] = []
    stops = (SpecialToken.empty, SpecialToken.reason_end)
    while True:
        if len(tokens) >= min(max_new, room):
            return SampledRationale(tokens=tokens, logprobs=logprobs, truncated=True)
        logits = next_token_logits(state, [*x, *tokens])
        policy_logprobs = _log_softmax(logits)
        if force_first is not None and not tokens:
            token = int(force_first)
        elif temperature <= GREEDY_TEMPERATURE:
            token = int(np.argmax(logits))
        else:
            probs = np.exp(_log_softmax(logits / temperature))
            cdf = np.cumsum(probs)
            token = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            token = min(token, len(probs) - 1)
        tokens.append(token)
        logprobs.append(float(policy_logprobs[token]))
        if token in stops:
            return SampledRationale(tokens=tokens, logprobs=logprobs, truncated=False)


def cosine(a: Node, b: Node) -> float:
    """Cosine of two unit embeddings."""
    return float(np.dot(a.value, b.value))
