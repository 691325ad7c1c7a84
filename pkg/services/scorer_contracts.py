"""
Contracts for the two scorers the mixture decoder consumes, the token-level
classifier score, and a reusable conformance check for implementations.
"""

import math
from typing import Any, Callable, Dict, Iterable, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from exceptions import NotNormalized, SpanOutOfRange
from models import NEG_INF, Token

# Reserved symbol for characters outside a scorer's alphabet
UNK_SYMBOL = '<unk>'

CONTRACT_TOLERANCE = 1e-6


@runtime_checkable
class GenerativeScorer(Protocol):
    """
    Left-to-right token scorer.

    `distribution(state)` returns natural-log probabilities over the whole
    vocabulary, indexed by token id. States are value-like and may be shared
    between hypotheses.
    """
    vocabulary: Sequence[Token]
    unk_token_id: Optional[int]

    def initial_state(self) -> Any: ...

    def step(self, state: Any, token_id: int) -> Any: ...

    def distribution(self, state: Any) -> np.ndarray: ...


@runtime_checkable
class PositionClassifier(Protocol):
    """
    Per-position character classifier. `distribution_at(source, i)` maps every
    character of its alphabet (which contains every source character and the
    UNK symbol) to a natural-log probability.
    """

    def distribution_at(self, source: str, i: int) -> Dict[str, float]: ...


def char_logprob(distribution: Dict[str, float], char: str) -> float:
    """Log-probability of `char`, falling back to the UNK symbol's mass"""
    value = distribution.get(char)
    if value is None:
        value = distribution.get(UNK_SYMBOL, NEG_INF)
    return value


def sm_token_logprob(classifier: PositionClassifier, source: str, i: int, token: Token,
                     distribution_at: Optional[Callable[[str, int], Dict[str, float]]] = None) -> float:
    """
    Classifier log-probability of a token ending at position i (exclusive):
    the sum over its characters of log p_SM(char | source, position).

    `distribution_at` lets the decoder pass its per-sentence cache.

    Raises:
        SpanOutOfRange: the token would start before 0 or end after len(source)
    """
    length = len(token.chars)
    if i - length < 0 or i > len(source):
        raise SpanOutOfRange(
            f"Token '{token.chars}' ending at {i} does not fit a source of length {len(source)}"
        )
    lookup = distribution_at or classifier.distribution_at
    return sum(
        char_logprob(lookup(source, i - length + j), token.chars[j])
        for j in range(length)
    )


def log_sum_exp(log_values: np.ndarray) -> float:
    finite = log_values[np.isfinite(log_values)]
    if finite.size == 0:
        return NEG_INF
    peak = float(np.max(finite))
    return peak + math.log(float(np.sum(np.exp(finite - peak))))


def check_normalized(log_probs: Iterable[float], tolerance: float = CONTRACT_TOLERANCE) -> float:
    """
    Return the probability mass of a log-probability collection.

    Raises:
        NotNormalized: the mass differs from 1 by more than `tolerance`
    """
    values = np.fromiter(log_probs, dtype=np.float64)
    mass = float(np.sum(np.exp(values)))
    if abs(mass - 1.0) > tolerance:
        raise NotNormalized(f"Distribution sums to {mass:.12f}, expected 1 within {tolerance}")
    return mass


def check_generative_contract(scorer: GenerativeScorer, token_paths: Iterable[Sequence[int]],
                              tolerance: float = CONTRACT_TOLERANCE) -> int:
    """
    Conformance check for a generative scorer: every reachable distribution
    normalizes, has one entry per vocabulary token, and stepping is
    deterministic. Returns the number of states checked.
    """
    checked = 0
    for path in token_paths:
        state = scorer.initial_state()
        replay = scorer.initial_state()
        for token_id in [None, *path]:
            if token_id is not None:
                state = scorer.step(state, token_id)
                replay = scorer.step(replay, token_id)
            if state != replay:
                raise AssertionError(f"step is not deterministic along path {list(path)}")
            distribution = scorer.distribution(state)
            if len(distribution) != len(scorer.vocabulary):
                raise AssertionError("distribution length differs from vocabulary size")
            check_normalized(distribution, tolerance)
            if not np.array_equal(distribution, scorer.distribution(replay)):
                raise AssertionError("distribution depends on more than the state")
            checked += 1
    return checked


def check_classifier_contract(classifier: PositionClassifier, sources: Iterable[str],
                              tolerance: float = CONTRACT_TOLERANCE) -> int:
    """
    Conformance check for a position classifier: every per-position map
    normalizes, contains the source character, and is a pure function of
    (source, i). Returns the number of positions checked.
    """
    checked = 0
    for source in sources:
        for i, char in enumerate(source):
            distribution = classifier.distribution_at(source, i)
            check_normalized(distribution.values(), tolerance)
            if char not in distribution:
                raise AssertionError(f"source character '{char}' missing from the alphabet at {i}")
            if distribution != classifier.distribution_at(source, i):
                raise AssertionError("distribution_at is not deterministic")
            checked += 1
    return checked
