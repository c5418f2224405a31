"""Exact marginal probabilities, for validating the sampling estimator.

Two independent routes: brute-force enumeration of every tokenization
(works with any backend, bounded by a tokenization cap) and a forward
dynamic program over (byte position, recent tokens) states that exploits
the fixed-order Markov property of n-gram backends and scales to strings
with astronomically many tokenizations.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .errors import EnumerationCapError, UntokenizableSpanError
from .lm import NGramBackend, ScoringBackend
from .tokenizer import TokenizerSpec, count_tokenizations, enumerate_tokenizations

DEFAULT_CAP = 1_000_000
_SCORE_BATCH = 8192


def exact_marginal_enumerate(
    spec: TokenizerSpec,
    backend: ScoringBackend,
    s: bytes,
    cap: int = DEFAULT_CAP,
) -> tuple[float, int]:
    """log of the summed probability of every tokenization of `s`.

    Returns (log marginal, tokenization count). Refuses to enumerate more
    than `cap` tokenizations.
    """
    total = count_tokenizations(spec, s)
    if total == 0:
        raise UntokenizableSpanError(s)
    if total > cap:
        raise EnumerationCapError(total, cap)
    candidates = enumerate_tokenizations(spec, s, None).candidates
    prefix = backend.initial_prefix()
    logs: list[float] = []
    for i in range(0, len(candidates), _SCORE_BATCH):
        batch = candidates[i : i + _SCORE_BATCH]
        logs.extend(
            backend.score_continuations(prefix, [c.token_ids for c in batch])
        )
    return float(logsumexp(np.asarray(logs, dtype=float))), total


def exact_marginal_lattice(
    spec: TokenizerSpec, backend: NGramBackend, s: bytes
) -> float:
    """Exact log marginal via a forward pass over the tokenization lattice.

    States are (byte position, last order-1 token ids); transitions are the
    vocabulary tokens matching `s` at the position. Only valid for backends
    whose conditionals depend on a bounded context, i.e. n-gram models.
    """
    if not isinstance(backend, NGramBackend):
        raise TypeError("lattice marginalization requires an n-gram backend")
    if not s:
        raise ValueError("sequence must be non-empty")

    ctx_len = backend.order - 1
    matches = spec.token_matches(s)
    n = len(s)

    start_ctx = tuple(backend.initial_prefix())[-ctx_len:] if ctx_len else ()
    frontier: list[dict[tuple[int, ...], float]] = [dict() for _ in range(n + 1)]
    frontier[0][start_ctx] = 0.0

    for pos in range(n):
        states = frontier[pos]
        if not states:
            continue
        for ctx, log_alpha in states.items():
            for tid, end in matches[pos]:
                log_w = log_alpha + backend.logp(tid, ctx)
                new_ctx = (ctx + (tid,))[-ctx_len:] if ctx_len else ()
                cell = frontier[end]
                prev = cell.get(new_ctx)
                cell[new_ctx] = (
                    log_w if prev is None else float(np.logaddexp(prev, log_w))
                )

    final = frontier[n]
    if not final:
        raise UntokenizableSpanError(s)
    return float(logsumexp(np.asarray(list(final.values()), dtype=float)))
