"""Scorers the bridge can serve.

A scorer turns (prefix, candidates) into one conditional log probability
per candidate, natural log. The uniform scorer needs no model weights and
exists so the wire protocol can be exercised anywhere; the transformer
scorer wraps a `transformers` causal LM with teacher-forced scoring.
"""

from __future__ import annotations

import math


class UniformScorer:
    """Every token id in [0, n) is equally likely, regardless of context."""

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        self.context_limit = 0
        self.bos_token_id = None
        self.model_name = f"uniform-{vocab_size}"
        self._log_p = -math.log(vocab_size)

    def validate_ids(self, ids) -> None:
        for t in ids:
            if not 0 <= t < self.vocab_size:
                raise IndexError(f"token id {t} out of range [0, {self.vocab_size})")

    def score(self, prefix, candidates) -> list[float]:
        self.validate_ids(prefix)
        for cand in candidates:
            self.validate_ids(cand)
        return [len(cand) * self._log_p for cand in candidates]


class TransformerScorer:
    """Teacher-forced scoring with a `transformers` causal LM.

    Candidates sharing the request's prefix are padded into one batch and
    scored in a single forward pass (chunked by `batch_size`). Prefixes
    longer than the model window are left-truncated; an empty prefix is
    scored from the model's BOS token.
    """

    def __init__(self, model_name: str, device: str = "cpu", batch_size: int = 16):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self.model_name = model_name
        self.device = device
        self.batch_size = batch_size
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForCausalLM.from_pretrained(model_name)
        self.model.to(device)
        self.model.eval()

        config = self.model.config
        self.vocab_size = int(config.vocab_size)
        self.context_limit = int(
            getattr(config, "n_positions", None)
            or getattr(config, "max_position_embeddings", 0)
            or 0
        )
        bos = config.bos_token_id
        if bos is None:
            bos = self.tokenizer.bos_token_id
        self.bos_token_id = int(bos) if bos is not None else None
        self.truncated_requests = 0

    def validate_ids(self, ids) -> None:
        for t in ids:
            if not 0 <= t < self.vocab_size:
                raise IndexError(f"token id {t} out of range [0, {self.vocab_size})")

    def tokenizer_payload(self) -> dict:
        """The vocab/merges payload, bit-compatible with the model's files."""
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            files = self.tokenizer.save_vocabulary(tmp)
            vocab_file = next(f for f in files if f.endswith("vocab.json"))
            merges_file = next(
                (f for f in files if f.endswith("merges.txt")), None
            )
            import json

            with open(vocab_file, encoding="utf-8") as f:
                vocab = json.load(f)
            merges: list[str] = []
            if merges_file:
                with open(merges_file, encoding="utf-8") as f:
                    merges = [line.rstrip("\n") for line in f if line.strip()]
        return {"vocab": vocab, "merges": merges}

    def _effective_prefix(self, prefix, candidate_len: int) -> list[int]:
        prefix = list(prefix)
        if not prefix:
            if self.bos_token_id is None:
                raise ValueError("empty prefix and the model has no BOS token")
            prefix = [self.bos_token_id]
        if self.context_limit:
            budget = self.context_limit - candidate_len
            if budget < 1:
                raise ValueError(
                    f"candidate of {candidate_len} tokens exceeds the "
                    f"{self.context_limit}-token model window"
                )
            if len(prefix) > budget:
                prefix = prefix[-budget:]
                self.truncated_requests += 1
        return prefix

    def score(self, prefix, candidates) -> list[float]:
        torch = self._torch
        self.validate_ids(prefix)
        for cand in candidates:
            self.validate_ids(cand)

        out: list[float] = []
        max_cand = max(len(c) for c in candidates)
        base = self._effective_prefix(prefix, max_cand)
        with torch.no_grad():
            for start in range(0, len(candidates), self.batch_size):
                chunk = candidates[start : start + self.batch_size]
                rows = [base + list(c) for c in chunk]
                width = max(len(r) for r in rows)
                input_ids = torch.zeros((len(rows), width), dtype=torch.long)
                mask = torch.zeros((len(rows), width), dtype=torch.long)
                for i, row in enumerate(rows):
                    input_ids[i, : len(row)] = torch.tensor(row)
                    mask[i, : len(row)] = 1
                logits = self.model(
                    input_ids=input_ids.to(self.device),
                    attention_mask=mask.to(self.device),
                ).logits
                logprobs = torch.log_softmax(logits.float(), dim=-1)
                for i, cand in enumerate(chunk):
                    total = 0.0
                    offset = len(base)
                    for j, token in enumerate(cand):
                        # logits at position p predict the token at p+1
                        total += float(logprobs[i, offset + j - 1, token])
                    out.append(total)
        return out
