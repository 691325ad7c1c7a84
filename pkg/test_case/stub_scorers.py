"""
Small deterministic scorers implementing the generative-scorer and
position-classifier contracts, shared by the test modules.
"""

import math
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from models import Token


def build_vocabulary(chars: Sequence[str], multi_tokens: Sequence[str] = ()) -> tuple:
    tokens = [Token(chars=char, token_id=i) for i, char in enumerate(chars)]
    tokens += [Token(chars=chars_, token_id=len(chars) + i) for i, chars_ in enumerate(multi_tokens)]
    return tuple(tokens)


class FixedLM:
    """Same log-probability vector in every state"""

    unk_token_id = None

    def __init__(self, chars: Sequence[str], log_probs: Sequence[float], multi_tokens: Sequence[str] = ()):
        self.vocabulary = build_vocabulary(chars, multi_tokens)
        self._vector = np.asarray(log_probs, dtype=np.float64)
        assert len(self._vector) == len(self.vocabulary)

    def initial_state(self):
        return ()

    def step(self, state, token_id: int):
        return (*state, token_id)

    def distribution(self, state) -> np.ndarray:
        return self._vector


class MarkovLM:
    """
    First-order token model: the distribution depends on the last token id
    only (None before the first token). Missing states fall back to `default`.
    """

    unk_token_id = None

    def __init__(self, chars: Sequence[str], tables: Mapping[Optional[int], Sequence[float]],
                 multi_tokens: Sequence[str] = (), default: Optional[Sequence[float]] = None):
        self.vocabulary = build_vocabulary(chars, multi_tokens)
        self._tables = {state: np.log(np.asarray(probs, dtype=np.float64)) for state, probs in tables.items()}
        self._default = None if default is None else np.log(np.asarray(default, dtype=np.float64))

    def initial_state(self):
        return None

    def step(self, state, token_id: int):
        return token_id

    def distribution(self, state) -> np.ndarray:
        return self._tables.get(state, self._default)


class RandomMarkovLM(MarkovLM):
    """MarkovLM with Dirichlet-sampled tables for every state"""

    def __init__(self, chars: Sequence[str], multi_tokens: Sequence[str] = (), seed: int = 0):
        rng = np.random.default_rng(seed)
        size = len(chars) + len(multi_tokens)
        tables = {state: rng.dirichlet(np.ones(size)) for state in [None, *range(size)]}
        super().__init__(chars, tables, multi_tokens)


class UniformLM(FixedLM):
    def __init__(self, chars: Sequence[str], multi_tokens: Sequence[str] = ()):
        size = len(chars) + len(multi_tokens)
        super().__init__(chars, [-math.log(size)] * size, multi_tokens)


class TableClassifier:
    """Per-position probability tables given directly; probabilities are turned into logs"""

    def __init__(self, tables: Sequence[Mapping[str, float]]):
        self._tables = [{char: math.log(p) for char, p in table.items()} for table in tables]

    def distribution_at(self, source: str, i: int) -> Dict[str, float]:
        return dict(self._tables[i])


class RandomClassifier:
    """Dirichlet distribution over alphabet plus source characters, seeded by (seed, source, i)"""

    def __init__(self, alphabet: Sequence[str], seed: int = 0):
        self.alphabet = tuple(alphabet)
        self.seed = seed

    def distribution_at(self, source: str, i: int) -> Dict[str, float]:
        chars = sorted(set(self.alphabet) | set(source))
        rng = np.random.default_rng([self.seed, i, *(ord(char) for char in source)])
        probs = rng.dirichlet(np.ones(len(chars)))
        return {char: math.log(p) for char, p in zip(chars, probs)}


class UniformClassifier:
    def __init__(self, alphabet: Sequence[str]):
        self.alphabet = tuple(alphabet)

    def distribution_at(self, source: str, i: int) -> Dict[str, float]:
        chars = sorted(set(self.alphabet) | set(source))
        return {char: -math.log(len(chars)) for char in chars}


class FailingClassifier:
    """Raises on a chosen source to exercise per-record isolation"""

    def __init__(self, inner, poisoned: str, error: Exception):
        self.inner = inner
        self.poisoned = poisoned
        self.error = error

    def distribution_at(self, source: str, i: int) -> Dict[str, float]:
        if source == self.poisoned:
            raise self.error
        return self.inner.distribution_at(source, i)
