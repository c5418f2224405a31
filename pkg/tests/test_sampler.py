import math
from collections import Counter

import numpy as np
import pytest

from tokmarg import (
    UniformBackend,
    enumerate_tokenizations,
    sample_tokenization,
    split_in_blocks,
    train_ngram,
)

from conftest import (
    CountingBackend,
    brute_force_posterior,
    make_single_byte_spec,
    q_of_all_paths,
)


def _rng(seed=0):
    return np.random.default_rng(seed)


def test_single_byte_vocab_gives_unique_sample(single_byte_spec):
    backend = UniformBackend(256)
    s = b"plain text"
    blocks = split_in_blocks(single_byte_spec, s, 4)
    sample = sample_tokenization(single_byte_spec, backend, blocks, 16, _rng())
    assert single_byte_spec.decode(sample.token_ids) == s
    assert sample.log_q == pytest.approx(0.0)
    assert all(choice.is_default for choice in sample.blocks)


def test_samples_always_decode_to_sequence(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    s = b"the thing and the other thing"
    blocks = split_in_blocks(english_spec, s, 6)
    for seed in range(25):
        sample = sample_tokenization(english_spec, backend, blocks, 8, _rng(seed))
        assert english_spec.decode(sample.token_ids) == s


def test_identical_rng_stream_gives_identical_sample(cab_spec):
    backend = UniformBackend(6)
    blocks = split_in_blocks(cab_spec, b"cab", 3)
    a = sample_tokenization(cab_spec, backend, blocks, 10, _rng(123))
    b = sample_tokenization(cab_spec, backend, blocks, 10, _rng(123))
    assert a == b


def test_one_backend_call_per_block(english_spec):
    backend = CountingBackend(UniformBackend(english_spec.vocab_size))
    s = b"the thing and another thing in the end"
    blocks = split_in_blocks(english_spec, s, 5)
    sample_tokenization(english_spec, backend, blocks, 4, _rng(1))
    assert backend.calls == len(blocks)


def test_single_block_sampling_matches_posterior(cab_spec):
    # One block covering the whole span makes the proposal the posterior.
    backend = UniformBackend(6)
    blocks = split_in_blocks(cab_spec, b"cab", 3)
    assert len(blocks) == 1
    expected = brute_force_posterior(cab_spec, backend, b"cab")
    assert expected[(5,)] == pytest.approx(36 / 49)
    assert expected[(3, 1)] == pytest.approx(6 / 49)
    assert expected[(4, 2)] == pytest.approx(6 / 49)
    assert expected[(3, 0, 2)] == pytest.approx(1 / 49)

    n = 40_000
    rng = _rng(2024)
    counts = Counter(
        sample_tokenization(cab_spec, backend, blocks, 10, rng).token_ids
        for _ in range(n)
    )
    for ids, prob in expected.items():
        half_width = 4 * math.sqrt(prob * (1 - prob) / n)
        assert counts[ids] / n == pytest.approx(prob, abs=half_width)


def test_single_block_ratio_is_constant(cab_spec):
    # With the proposal equal to the posterior, P(T,S)/Q(T|S) = P(S) for
    # every draw (the zero-variance case).
    backend = UniformBackend(6)
    blocks = split_in_blocks(cab_spec, b"cab", 3)
    ratios = set()
    for seed in range(32):
        sample = sample_tokenization(cab_spec, backend, blocks, 10, _rng(seed))
        ratios.add(round(sample.log_p_joint - sample.log_q, 12))
    assert len(ratios) == 1
    assert ratios.pop() == pytest.approx(math.log(49 / 216))


def test_proposal_is_a_proper_distribution(english_spec):
    backend = train_ngram(
        [[1, 2, 3], [4, 5, 6, 7]], order=2, alpha=1.0,
        vocab_size=english_spec.vocab_size,
    )
    blocks = split_in_blocks(english_spec, b"the in ll", 4)
    q = q_of_all_paths(english_spec, backend, blocks, None)
    assert sum(q.values()) == pytest.approx(1.0, abs=1e-9)


def test_sampled_q_matches_path_probability(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    blocks = split_in_blocks(english_spec, b"the in", 4)
    q = q_of_all_paths(english_spec, backend, blocks, None)
    for seed in range(10):
        sample = sample_tokenization(english_spec, backend, blocks, None, _rng(seed))
        assert math.exp(sample.log_q) == pytest.approx(q[sample.token_ids])


def test_is_default_flag_tracks_block_defaults(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    s = b"the thing"
    blocks = split_in_blocks(english_spec, s, 6)
    from tokmarg import default_tokenize

    defaults = [default_tokenize(english_spec, b.data).token_ids for b in blocks]
    for seed in range(20):
        sample = sample_tokenization(english_spec, backend, blocks, None, _rng(seed))
        pos = 0
        for choice, default_ids in zip(sample.blocks, defaults):
            chosen = sample.token_ids[pos : pos + choice.token_count]
            assert choice.is_default == (chosen == default_ids)
            pos += choice.token_count


def test_log_q_is_sum_of_block_weights(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    blocks = split_in_blocks(english_spec, b"the thing in", 5)
    sample = sample_tokenization(english_spec, backend, blocks, 6, _rng(9))
    assert sample.log_q == pytest.approx(
        sum(choice.log_weight for choice in sample.blocks)
    )
