"""
Synthetic parallel corpora: clean sentences are corrupted character by
character, sampling an error type in proportion to the non-identical mass of
the distortion table and a replacement uniformly from that type's relation set.
"""

import logging
from dataclasses import dataclass, field
from itertools import cycle, islice
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from exceptions import ConfigError, EmptyCorpus
from models import ERROR_TYPES, CorrectionInstance, DistortionType
from services.distortion_service import DistortionTable, SimilarityResources, relation_set

logger = logging.getLogger(__name__)


@dataclass
class SynthResult:
    instances: List[CorrectionInstance]
    total_chars: int = 0
    corrupted_chars: int = 0
    skipped_chars: int = 0
    type_counts: Dict[DistortionType, int] = field(default_factory=dict)
    type_weights: Dict[DistortionType, float] = field(default_factory=dict)

    @property
    def achieved_rate(self) -> float:
        return self.corrupted_chars / self.total_chars if self.total_chars else 0.0

    def target_type_ratio(self) -> Dict[str, float]:
        """Table mass of each error type, normalized over the error types"""
        mass = sum(self.type_weights.get(t, 0.0) for t in ERROR_TYPES)
        return {t.short_label: (self.type_weights.get(t, 0.0) / mass if mass else 0.0) for t in ERROR_TYPES}

    def achieved_type_ratio(self) -> Dict[str, float]:
        """Share of each error type among the corrupted characters"""
        corrupted = self.corrupted_chars
        return {t.short_label: (self.type_counts.get(t, 0) / corrupted if corrupted else 0.0) for t in ERROR_TYPES}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sentences': len(self.instances),
            'total_chars': self.total_chars,
            'corrupted_chars': self.corrupted_chars,
            'skipped_chars': self.skipped_chars,
            'achieved_rate': self.achieved_rate,
            'type_counts': {t.short_label: self.type_counts.get(t, 0) for t in ERROR_TYPES},
            'target_type_ratio': self.target_type_ratio(),
            'achieved_type_ratio': self.achieved_type_ratio()
        }


class CorruptionSampler:
    """Seeded per-character corruption; the same seed always yields the same draws"""

    def __init__(self, table: DistortionTable, resources: SimilarityResources,
                 error_rate: float = 0.1, seed: int = 42):
        if not 0.0 <= error_rate <= 1.0:
            raise ConfigError(f"error_rate must lie in [0, 1], got {error_rate}")
        self.table = table
        self.resources = resources
        self.error_rate = error_rate
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.type_weights = table.error_type_weights()
        self._choices: Dict[str, Tuple[Tuple[DistortionType, ...], np.ndarray]] = {}

    def _type_choices(self, char: str) -> Tuple[Tuple[DistortionType, ...], np.ndarray]:
        cached = self._choices.get(char)
        if cached is None:
            types = tuple(t for t in ERROR_TYPES if relation_set(char, t, self.resources))
            weights = np.array([self.type_weights[t] for t in types], dtype=np.float64)
            if types:
                weights = weights / weights.sum()
            cached = (types, weights)
            self._choices[char] = cached
        return cached

    def corrupt_char(self, char: str) -> Tuple[str, Optional[DistortionType], bool]:
        """
        Returns (output character, error type or None, skipped). A corruption
        draw on a character with no related characters at all is skipped.
        """
        if self.rng.random() >= self.error_rate:
            return char, None, False
        types, weights = self._type_choices(char)
        if not types:
            return char, None, True
        error_type = types[int(self.rng.choice(len(types), p=weights))]
        members = relation_set(char, error_type, self.resources)
        return members[int(self.rng.integers(len(members)))], error_type, False

    def corrupt(self, sentence: str, result: SynthResult) -> str:
        output = []
        for char in sentence:
            replacement, error_type, skipped = self.corrupt_char(char)
            result.total_chars += 1
            if skipped:
                result.skipped_chars += 1
            if error_type is not None:
                result.corrupted_chars += 1
                result.type_counts[error_type] = result.type_counts.get(error_type, 0) + 1
            output.append(replacement)
        return ''.join(output)


def synthesize(clean: Sequence[str], table: Optional[DistortionTable] = None,
               resources: Optional[SimilarityResources] = None, error_rate: float = 0.1,
               seed: int = 42, target_sentences: Optional[int] = None,
               show_progress: bool = False) -> SynthResult:
    """
    Build a parallel corpus whose references are the clean sentences.

    With target_sentences the clean corpus is cycled until that many records
    exist. Ids are 'synth-NNNNNN' in output order.

    Raises:
        EmptyCorpus: no non-empty clean sentence
    """
    sentences = [sentence for sentence in clean if sentence]
    if not sentences:
        raise EmptyCorpus("Cannot synthesize from an empty clean corpus")
    count = target_sentences if target_sentences is not None else len(sentences)
    if count < 1:
        raise ConfigError(f"target_sentences must be >= 1, got {count}")

    sampler = CorruptionSampler(table or DistortionTable(), resources or SimilarityResources.empty(),
                                error_rate=error_rate, seed=seed)
    result = SynthResult(instances=[], type_weights=sampler.type_weights)
    source_iter = islice(cycle(sentences), count)
    if show_progress:
        source_iter = tqdm(source_iter, total=count, desc='synth', leave=False)
    for index, sentence in enumerate(source_iter):
        corrupted = sampler.corrupt(sentence, result)
        result.instances.append(CorrectionInstance(source=corrupted, reference=sentence, id=f"synth-{index:06d}"))

    logger.info(
        f"Synthesized {len(result.instances)} sentences: "
        f"{result.corrupted_chars}/{result.total_chars} characters corrupted "
        f"(achieved rate {result.achieved_rate:.4f}, target {error_rate})"
    )
    if result.skipped_chars:
        logger.warning(f"{result.skipped_chars} corruption draws skipped: no related characters")
    return result
