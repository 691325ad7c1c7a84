"""
Reference position classifier: p(y | x, i) ∝ prior(y) * p_DM(x_i | y)^(1/T),
normalized over the character alphabet.
"""

import logging
import math
import threading
from collections import Counter
from typing import Dict, Mapping, Optional, Sequence, Tuple

from exceptions import ConfigError, EmptyCorpus, IndexOutOfRange
from services.distortion_service import DistortionTable, SimilarityResources, distortion_logprob
from services.scorer_contracts import UNK_SYMBOL

logger = logging.getLogger(__name__)


class NoisyChannelClassifier:
    """
    Unigram prior combined with the distortion channel. The alphabet is the
    prior's characters plus the UNK symbol, extended on each call with the
    characters of the sentence being scored.
    """

    def __init__(self, table: DistortionTable, resources: SimilarityResources,
                 prior_counts: Mapping[str, int], temperature: float = 1.0, k: float = 0.1):
        if not temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {temperature}")
        if not k > 0:
            raise ConfigError(f"prior smoothing k must be > 0, got {k}")
        self.table = table
        self.resources = resources
        self.temperature = temperature
        self.k = k
        self.prior_counts: Dict[str, int] = {char: count for char, count in prior_counts.items() if char != UNK_SYMBOL}
        self.base_alphabet: Tuple[str, ...] = (*sorted(self.prior_counts), UNK_SYMBOL)
        self._prior_denominator = sum(self.prior_counts.values()) + k * len(self.base_alphabet)
        self._channel_cache: Dict[str, Dict[str, float]] = {}
        self._lock = threading.Lock()

    def prior_logprob(self, char: str) -> float:
        """Add-k smoothed unigram log-prior; unseen characters get the smoothed floor"""
        return math.log((self.prior_counts.get(char, 0) + self.k) / self._prior_denominator)

    def _score(self, source_char: str, candidate: str) -> float:
        channel = distortion_logprob(source_char, candidate, self.table, self.resources)
        return self.prior_logprob(candidate) + channel / self.temperature

    def _base_scores(self, source_char: str) -> Dict[str, float]:
        cached = self._channel_cache.get(source_char)
        if cached is None:
            cached = {candidate: self._score(source_char, candidate) for candidate in self.base_alphabet}
            with self._lock:
                self._channel_cache[source_char] = cached
        return cached

    def distribution_at(self, source: str, i: int) -> Dict[str, float]:
        """
        Log-probability map over the alphabet at position i.

        Raises:
            IndexOutOfRange: i is not a valid position of source
        """
        if not 0 <= i < len(source):
            raise IndexOutOfRange(f"Position {i} is outside a source of length {len(source)}")
        source_char = source[i]
        scores = dict(self._base_scores(source_char))
        for char in source:
            if char not in scores:
                scores[char] = self._score(source_char, char)

        peak = max(scores.values())
        normalizer = peak + math.log(sum(math.exp(score - peak) for score in scores.values()))
        return {char: score - normalizer for char, score in scores.items()}


def classifier_distribution(classifier: NoisyChannelClassifier, source: str, i: int) -> Dict[str, float]:
    return classifier.distribution_at(source, i)


def classifier_train(corpus: Sequence[str], table: Optional[DistortionTable] = None,
                     resources: Optional[SimilarityResources] = None,
                     temperature: float = 1.0, k: float = 0.1) -> NoisyChannelClassifier:
    """
    Build the classifier prior from unigram character counts of a corpus.

    Raises:
        EmptyCorpus: the corpus has no characters
    """
    counts: Counter = Counter()
    for sentence in corpus:
        counts.update(sentence)
    if not counts:
        raise EmptyCorpus("Cannot build a classifier prior from an empty corpus")
    classifier = NoisyChannelClassifier(
        table=table or DistortionTable(),
        resources=resources or SimilarityResources.empty(),
        prior_counts=counts,
        temperature=temperature,
        k=k
    )
    logger.info(f"Built noisy-channel classifier: {len(counts)} prior characters, temperature={temperature}")
    return classifier
