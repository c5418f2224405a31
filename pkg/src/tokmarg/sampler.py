"""Sampling one tokenization of a sequence from the block-wise proposal.

The proposal walks the blocks left to right. For each block it enumerates
the (top-M) valid tokenizations, scores each as a continuation of the
tokens chosen so far, renormalizes those scores over the block, and draws
one. The product of the chosen normalized weights is the proposal
probability of the resulting tokenization; the sum of the chosen raw
scores is its joint log probability under the model.

Everything stays in log space: block weights are normalized by
log-sum-exp subtraction and the categorical draw is inverse-CDF on the
exponentiated weights, so 800-token prefixes cannot underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import BackendError, UntokenizableSpanError
from .lm import ScoringBackend
from .segmenter import Block
from .tokenizer import TokenizerSpec, default_tokenize, enumerate_tokenizations


@dataclass(frozen=True)
class BlockChoice:
    """What the proposal picked for one block."""

    index: int
    rank: int  # position of the choice in the block's candidate ordering
    token_count: int
    is_default: bool
    log_weight: float  # log of the normalized proposal weight


@dataclass(frozen=True)
class TokenizationSample:
    """One sampled tokenization with its proposal and joint probabilities."""

    token_ids: tuple[int, ...]
    log_p_joint: float
    log_q: float
    blocks: tuple[BlockChoice, ...]


def _block_default_ids(spec: TokenizerSpec, data: bytes):
    # A cropped (T2) fragment may have no default tokenization at all; the
    # default is then unreachable and every choice counts as non-default.
    try:
        return default_tokenize(spec, data).token_ids
    except UntokenizableSpanError:
        return None


def sample_tokenization(
    spec: TokenizerSpec,
    backend: ScoringBackend,
    blocks: list[Block],
    max_candidates: int | None,
    rng: np.random.Generator,
) -> TokenizationSample:
    """Draw one tokenization of the sequence the blocks partition.

    Makes exactly one backend call per block, scoring at most
    `max_candidates` continuations each. Deterministic given `rng`.
    """
    prefix = backend.initial_prefix()
    token_ids: list[int] = []
    choices: list[BlockChoice] = []
    log_q = 0.0
    log_p_joint = 0.0

    for index, block in enumerate(blocks):
        cset = enumerate_tokenizations(spec, block.data, max_candidates)
        raw = np.asarray(
            backend.score_continuations(
                prefix, [c.token_ids for c in cset.candidates]
            ),
            dtype=float,
        )
        log_norm = logsumexp(raw)
        if not np.isfinite(log_norm):
            raise BackendError(
                f"all {len(cset.candidates)} candidates of block {index} "
                "scored zero probability"
            )
        log_weights = raw - log_norm

        cdf = np.cumsum(np.exp(log_weights))
        rank = int(np.searchsorted(cdf, rng.random(), side="right"))
        rank = min(rank, len(cset.candidates) - 1)

        chosen = cset.candidates[rank]
        default_ids = _block_default_ids(spec, block.data)
        choices.append(
            BlockChoice(
                index=index,
                rank=rank,
                token_count=len(chosen.token_ids),
                is_default=chosen.token_ids == default_ids,
                log_weight=float(log_weights[rank]),
            )
        )
        log_q += float(log_weights[rank])
        log_p_joint += float(raw[rank])
        token_ids.extend(chosen.token_ids)
        prefix = prefix + list(chosen.token_ids)

    return TokenizationSample(
        token_ids=tuple(token_ids),
        log_p_joint=log_p_joint,
        log_q=log_q,
        blocks=tuple(choices),
    )
