"""Marginal string probabilities for token-level language models.

The probability a language model assigns to a character string is the sum
of the probabilities of every token sequence that spells it. This package
estimates that marginal with a block-wise importance-sampling proposal,
checks it against exact oracles, and reports bits-per-character metrics
with bootstrap confidence intervals.
"""

from .analysis import (
    DatasetReport,
    bin_blocks_by_q_default,
    block_frequency_table,
    block_observations,
    dataset_report,
    length_by_frequency_report,
)
from .corpus import build_sequences
from .errors import (
    BackendError,
    EnumerationCapError,
    TokenizerFormatError,
    TokmargError,
    UntokenizableSpanError,
)
from .estimator import (
    MarginalEstimate,
    bootstrap_ci,
    draw_tokenization_samples,
    estimate_marginal,
)
from .lm import (
    NGramBackend,
    RemoteBackend,
    ScoringBackend,
    UniformBackend,
    train_ngram,
)
from .oracle import exact_marginal_enumerate, exact_marginal_lattice
from .sampler import TokenizationSample, sample_tokenization
from .segmenter import Block, recommend_block_len, split_in_blocks
from .tokenizer import (
    CandidateSet,
    Tokenization,
    TokenizerSpec,
    default_tokenize,
    enumerate_tokenizations,
    load_tokenizer,
    tokenizer_from_payload,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BackendError",
    "CandidateSet",
    "DatasetReport",
    "EnumerationCapError",
    "MarginalEstimate",
    "NGramBackend",
    "RemoteBackend",
    "ScoringBackend",
    "Tokenization",
    "TokenizationSample",
    "TokenizerFormatError",
    "TokenizerSpec",
    "TokmargError",
    "UniformBackend",
    "UntokenizableSpanError",
    "bin_blocks_by_q_default",
    "block_frequency_table",
    "block_observations",
    "bootstrap_ci",
    "build_sequences",
    "dataset_report",
    "default_tokenize",
    "draw_tokenization_samples",
    "enumerate_tokenizations",
    "estimate_marginal",
    "exact_marginal_enumerate",
    "exact_marginal_lattice",
    "length_by_frequency_report",
    "load_tokenizer",
    "recommend_block_len",
    "sample_tokenization",
    "split_in_blocks",
    "tokenizer_from_payload",
    "train_ngram",
]
