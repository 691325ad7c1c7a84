"""
Mixture beam-search decoder.

Each extension of a hypothesis by a token t covering source positions
[i - l, i) adds

    log p_LM(t | prefix) + m * (alpha * log p_DM(x[i-l:i] | t) + beta * log p_SM(t | x, i))

where m = 1 + H(p_LM(. | prefix)) when the faithfulness reward is enabled
and 1 otherwise. Hypotheses are only compared at equal character coverage.
"""

import heapq
import logging
import math
import threading
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import (
    CandidateViolation, NoCompleteHypothesis, NotNormalized, SearchSpaceTooLarge, SpanOverflow
)
from models import (
    NEG_INF, CandidatePolicy, CandidateSet, Hypothesis, MixtureConfig, RankedOutput, ScoreBreakdown, Token
)
from services.distortion_service import DistortionModel, SimilarityResources, confusion_set
from services.scorer_contracts import (
    CONTRACT_TOLERANCE, UNK_SYMBOL, GenerativeScorer, PositionClassifier, sm_token_logprob
)

logger = logging.getLogger(__name__)

TraceSink = Callable[[Dict[str, Any]], None]


def entropy(log_probs: Sequence[float]) -> float:
    """
    Entropy in nats of a distribution given as natural-log probabilities,
    with 0 * log 0 taken as 0.

    Raises:
        NotNormalized: the probabilities do not sum to 1 within 1e-6
    """
    values = np.asarray(log_probs, dtype=np.float64)
    probs = np.exp(values)
    mass = float(np.sum(probs))
    if abs(mass - 1.0) > CONTRACT_TOLERANCE:
        raise NotNormalized(f"Distribution sums to {mass:.12f}")
    support = probs > 0
    h = float(-np.sum(probs[support] * values[support]))
    return min(max(h, 0.0), math.log(len(values)))


def build_candidates(source: str, policy: CandidatePolicy, res: SimilarityResources,
                     classifier: Optional[PositionClassifier] = None,
                     distribution_at: Optional[Callable[[str, int], Dict[str, float]]] = None) -> CandidateSet:
    """
    Per-position candidate characters: identity, then the classifier's top-k
    characters, then the confusion set, truncated to policy.max_candidates.
    Without the identity a position may lose its source character; a position
    left with no candidate at all keeps the source character.
    """
    lookup = distribution_at or (classifier.distribution_at if classifier is not None else None)
    per_position = []
    for i, char in enumerate(source):
        ordered: List[str] = []
        if policy.include_identity:
            ordered.append(char)
        if policy.top_k_classifier > 0 and lookup is not None:
            distribution = lookup(source, i)
            ranked = sorted(
                (candidate for candidate in distribution if candidate != UNK_SYMBOL),
                key=lambda candidate: (-distribution[candidate], candidate)
            )
            ordered.extend(ranked[:policy.top_k_classifier])
        if policy.include_confusion:
            ordered.extend(confusion_set(char, res))

        unique = list(dict.fromkeys(ordered))[:policy.max_candidates]
        if not unique:
            unique = [char]
        per_position.append(tuple(unique))
    return CandidateSet(per_position=tuple(per_position))


def _weighted(multiplier: float, weight: float, logprob: float) -> float:
    # a zero weight removes the term, even when its log-probability is -inf
    if weight == 0:
        return 0.0
    return multiplier * weight * logprob


class SentenceContext:
    """Per-sentence decoding state: candidates, allowed tokens and cached classifier outputs"""

    def __init__(self, source: str, classifier: PositionClassifier):
        self.source = source
        self.classifier = classifier
        self.candidates = CandidateSet(per_position=())
        self.allowed: Tuple[FrozenSet[str], ...] = ()
        self.token_cache: Dict[int, Tuple[Token, ...]] = {}
        self._distributions: Dict[int, Dict[str, float]] = {}

    def set_candidates(self, candidates: CandidateSet) -> None:
        if len(candidates) != len(self.source):
            raise CandidateViolation(
                f"Candidate set covers {len(candidates)} positions, source has {len(self.source)}"
            )
        self.candidates = candidates
        self.allowed = tuple(frozenset(chars) for chars in candidates.per_position)
        self.token_cache.clear()

    def distribution_at(self, source: str, i: int) -> Dict[str, float]:
        # classifier outputs depend only on (source, i)
        cached = self._distributions.get(i)
        if cached is None:
            cached = self.classifier.distribution_at(source, i)
            self._distributions[i] = cached
        return cached


class MixtureDecoder:
    """
    Decoder combining a generative scorer, a position classifier and the
    distortion model under a MixtureConfig.

    The decoder holds no per-sentence state, so one instance can decode
    different sentences from several threads.
    """

    def __init__(self, generative: GenerativeScorer, classifier: PositionClassifier,
                 distortion: Optional[DistortionModel] = None, config: Optional[MixtureConfig] = None,
                 trace_sink: Optional[TraceSink] = None):
        self.generative = generative
        self.classifier = classifier
        self.distortion = distortion or DistortionModel()
        self.config = config or MixtureConfig()
        self.trace_sink = trace_sink
        self._trace_lock = threading.Lock()

        self.unk_token_id = getattr(generative, 'unk_token_id', None)
        self._tokens_by_first_char: Dict[str, List[Token]] = {}
        single_chars = set()
        for token in generative.vocabulary:
            if token.token_id == self.unk_token_id:
                continue
            self._tokens_by_first_char.setdefault(token.chars[0], []).append(token)
            if len(token.chars) == 1:
                single_chars.add(token.chars)
        self._single_chars: FrozenSet[str] = frozenset(single_chars)
        self.vocabulary_size = len(generative.vocabulary)

    def with_config(self, config: MixtureConfig) -> 'MixtureDecoder':
        return MixtureDecoder(self.generative, self.classifier, self.distortion, config, self.trace_sink)

    # Sentence preparation

    def prepare(self, source: str, candidates: Optional[CandidateSet] = None) -> SentenceContext:
        sentence = SentenceContext(source, self.classifier)
        if candidates is None:
            candidates = build_candidates(
                source, self.config.candidate_policy, self.distortion.resources,
                distribution_at=sentence.distribution_at
            )
        sentence.set_candidates(candidates)
        return sentence

    def tokens_at(self, sentence: SentenceContext, position: int) -> Tuple[Token, ...]:
        """Vocabulary tokens starting at `position` whose characters all lie in the candidate sets"""
        cached = sentence.token_cache.get(position)
        if cached is not None:
            return cached
        n = len(sentence.source)
        matches: List[Token] = []
        for char in sentence.candidates.per_position[position]:
            for token in self._tokens_by_first_char.get(char, ()):
                end = position + len(token.chars)
                if end <= n and all(token.chars[j] in sentence.allowed[position + j]
                                    for j in range(1, len(token.chars))):
                    matches.append(token)
            if char not in self._single_chars and self.unk_token_id is not None:
                # out-of-vocabulary character emitted through the unknown token
                matches.append(Token(chars=char, token_id=self.unk_token_id))
        result = tuple(matches)
        sentence.token_cache[position] = result
        return result

    # Scoring

    def _step_context(self, hyp: Hypothesis) -> Tuple[np.ndarray, float]:
        distribution = self.generative.distribution(hyp.generative_state)
        multiplier = 1.0 + entropy(distribution) if self.config.fr_enabled else 1.0
        return distribution, multiplier

    def _extend(self, hyp: Hypothesis, token: Token, sentence: SentenceContext,
                distribution: np.ndarray, multiplier: float) -> Hypothesis:
        source = sentence.source
        start = hyp.covered_chars
        end = start + len(token.chars)
        if end > len(source):
            raise SpanOverflow(
                f"Token '{token.chars}' at {start} overflows a source of length {len(source)}"
            )
        for j, char in enumerate(token.chars):
            if char not in sentence.allowed[start + j]:
                raise CandidateViolation(f"'{char}' is not a candidate at position {start + j}")

        config = self.config
        lm_term = float(distribution[token.token_id])
        dm_term = 0.0
        if config.dm_enabled:
            dm_term = _weighted(multiplier, config.alpha,
                                self.distortion.token_logprob(source[start:end], token))
        sm_term = _weighted(multiplier, config.beta,
                            sm_token_logprob(self.classifier, source, end, token, sentence.distribution_at))

        return Hypothesis(
            tokens=(*hyp.tokens, token),
            covered_chars=end,
            score=hyp.score.add(lm_term, dm_term, sm_term),
            generative_state=self.generative.step(hyp.generative_state, token.token_id),
            multipliers=(*hyp.multipliers, multiplier)
        )

    def extend_score(self, hyp: Hypothesis, token: Token, sentence: SentenceContext) -> ScoreBreakdown:
        """
        Score of `hyp` extended by `token`.

        Raises:
            SpanOverflow: the token runs past the end of the source
            CandidateViolation: a token character is not a candidate at its position
        """
        distribution, multiplier = self._step_context(hyp)
        return self._extend(hyp, token, sentence, distribution, multiplier).score

    def initial_hypothesis(self) -> Hypothesis:
        return Hypothesis(generative_state=self.generative.initial_state())

    # Search

    def _prune(self, hypotheses: List[Hypothesis]) -> List[Hypothesis]:
        return heapq.nsmallest(self.config.beam_size, hypotheses, key=Hypothesis.rank_key)

    def _emit_trace(self, trace_id: str, covered: int, beam: List[Hypothesis]) -> None:
        if self.trace_sink is None:
            return
        record = {
            'event': 'frontier',
            'sentence_id': trace_id,
            'covered_chars': covered,
            'beam': [hyp.to_dict() for hyp in beam]
        }
        with self._trace_lock:
            self.trace_sink(record)

    def beam_search(self, source: str, candidates: Optional[CandidateSet] = None,
                    trace_id: str = '') -> List[RankedOutput]:
        """
        Ranked complete outputs (at most beam_size), best first.

        Frontier c holds hypotheses covering exactly c characters; it is pruned
        to the K best before being expanded.

        Raises:
            NoCompleteHypothesis: every path was eliminated
        """
        sentence = self.prepare(source, candidates)
        n = len(source)
        frontiers: Dict[int, List[Hypothesis]] = {0: [self.initial_hypothesis()]}

        for covered in range(n):
            beam = self._prune(frontiers.pop(covered, []))
            self._emit_trace(trace_id, covered, beam)
            for hyp in beam:
                distribution, multiplier = self._step_context(hyp)
                for token in self.tokens_at(sentence, covered):
                    extended = self._extend(hyp, token, sentence, distribution, multiplier)
                    if extended.score.total == NEG_INF:
                        continue
                    frontiers.setdefault(extended.covered_chars, []).append(extended)

        final = self._prune(frontiers.get(n, []))
        self._emit_trace(trace_id, n, final)
        if not final:
            raise NoCompleteHypothesis(f"No complete hypothesis for source '{source}'")
        return [RankedOutput.from_hypothesis(hyp) for hyp in final]

    def count_paths(self, sentence: SentenceContext) -> int:
        """Number of complete token sequences consistent with the candidate sets"""
        n = len(sentence.source)
        ways = [0] * (n + 1)
        ways[n] = 1
        for position in range(n - 1, -1, -1):
            ways[position] = sum(ways[position + len(token.chars)] for token in self.tokens_at(sentence, position))
        return ways[0]

    def exhaustive_search(self, source: str, candidates: Optional[CandidateSet] = None) -> RankedOutput:
        """
        Best complete output over every token sequence consistent with the
        candidates, with the same tie-break as beam_search.

        Raises:
            SearchSpaceTooLarge: more paths than config.exhaustive_bound
            NoCompleteHypothesis: every path was eliminated
        """
        sentence = self.prepare(source, candidates)
        paths = self.count_paths(sentence)
        if paths > self.config.exhaustive_bound:
            raise SearchSpaceTooLarge(
                f"{paths} paths exceed the exhaustive bound of {self.config.exhaustive_bound}"
            )

        n = len(source)
        best: Optional[Hypothesis] = None
        stack = [self.initial_hypothesis()]
        while stack:
            hyp = stack.pop()
            if hyp.covered_chars == n:
                if best is None or hyp.rank_key() < best.rank_key():
                    best = hyp
                continue
            distribution, multiplier = self._step_context(hyp)
            for token in self.tokens_at(sentence, hyp.covered_chars):
                extended = self._extend(hyp, token, sentence, distribution, multiplier)
                if extended.score.total != NEG_INF:
                    stack.append(extended)

        if best is None:
            raise NoCompleteHypothesis(f"No complete hypothesis for source '{source}'")
        return RankedOutput.from_hypothesis(best)

    def correct(self, source: str, trace_id: str = '') -> str:
        return self.beam_search(source, trace_id=trace_id)[0].output


def classifier_argmax_decode(source: str, classifier: PositionClassifier) -> str:
    """Classification-only baseline: the most probable real character at every position"""
    output = []
    for i, char in enumerate(source):
        distribution = classifier.distribution_at(source, i)
        best = min(
            (candidate for candidate in distribution if candidate != UNK_SYMBOL),
            key=lambda candidate: (-distribution[candidate], candidate),
            default=char
        )
        output.append(best)
    return ''.join(output)
