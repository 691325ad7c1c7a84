"""
Test the mixture decoder: entropy, per-extension scoring, beam search
against the exhaustive oracle, and candidate construction.
"""

import os
import sys
import math
import itertools

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from exceptions import CandidateViolation, NotNormalized, SearchSpaceTooLarge, SpanOverflow
from models import CandidatePolicy, CandidateSet, DistortionType, MixtureConfig, Token
from services.decoder_service import MixtureDecoder, build_candidates, classifier_argmax_decode, entropy
from services.distortion_service import (
    DistortionModel, DistortionTable, SimilarityResources, default_resource_paths, load_resources
)
from stub_scorers import (
    MarkovLM, RandomClassifier, RandomMarkovLM, TableClassifier, UniformClassifier, UniformLM
)

ALPHABET = 'abcde'

SMALL_RESOURCES = SimilarityResources(
    pinyin={'a': {'ba'}, 'b': {'ba'}, 'c': {'pa'}, 'd': {'da'}},
    shape_sets={'e': {'c'}}
)


def stub_table(unrelated_logprob: float) -> DistortionTable:
    return DistortionTable({
        DistortionType.IDENTICAL: 0.9,
        DistortionType.SAME_PINYIN: 0.01,
        DistortionType.SIMILAR_PINYIN: 0.01,
        DistortionType.SIMILAR_SHAPE: 0.01,
        DistortionType.UNRELATED: math.exp(unrelated_logprob)
    })


def stub_decoder(**config) -> MixtureDecoder:
    """Two-token uniform LM, dm(a | b) = -2, sm(b at 0) = -3"""
    classifier = TableClassifier([{'a': 1 - math.exp(-3), 'b': math.exp(-3)}])
    return MixtureDecoder(
        UniformLM(['a', 'b']),
        classifier,
        DistortionModel(stub_table(-2.0), SimilarityResources.empty()),
        MixtureConfig(**config)
    )


def random_instance(seed: int):
    """Random source, candidate sets (<= 3 per position) and stub scorers"""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    source = ''.join(str(c) for c in rng.choice(list(ALPHABET), size=n))
    per_position = []
    for char in source:
        others = [c for c in ALPHABET if c != char]
        extra = rng.choice(others, size=int(rng.integers(0, 3)), replace=False)
        per_position.append((str(char), *(str(c) for c in extra)))
    bigrams = [a + b for a in ALPHABET for b in ALPHABET]
    multi = sorted(set(str(b) for b in rng.choice(bigrams, size=int(rng.integers(0, 3)), replace=False)))
    lm = RandomMarkovLM(list(ALPHABET), multi, seed=seed)
    classifier = RandomClassifier(ALPHABET, seed=seed)
    config = MixtureConfig(
        alpha=float(rng.uniform(0, 1.5)),
        beta=float(rng.uniform(0, 1.5)),
        dm_enabled=bool(rng.integers(0, 2)),
        fr_enabled=bool(rng.integers(0, 2))
    )
    return source, CandidateSet(per_position=tuple(per_position)), lm, classifier, config


def test_entropy_values():
    """Entropy in nats of uniform, one-hot and skewed distributions"""
    print("\n=== Testing entropy ===")
    assert entropy(np.log(np.full(4, 0.25))) == pytest.approx(math.log(4), abs=1e-12)
    assert entropy(np.array([0.0, -np.inf, -np.inf])) == 0.0
    assert entropy(np.log([0.5, 0.25, 0.25])) == pytest.approx(1.5 * math.log(2), abs=1e-12)
    print("✅ Entropy values match")


def test_entropy_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        entropy(np.log([0.5, 0.25]))


def test_extension_increment_with_stub_values():
    """lm=-1, H=ln 2, alpha=0.5, dm=-2, beta=0.9, sm=-3 gives -7.2646"""
    print("\n=== Testing mixture increment ===")
    decoder = stub_decoder(alpha=0.5, beta=0.9)
    sentence = decoder.prepare('a', CandidateSet(per_position=(('a', 'b'),)))
    token = Token('b', 1)
    distribution = np.array([-1.0, -1.0])

    extended = decoder._extend(decoder.initial_hypothesis(), token, sentence, distribution, 1.0 + math.log(2))

    print(f"Increment: {extended.score.total:.6f}")
    assert extended.score.total == pytest.approx(-7.2646, abs=1e-4)
    assert extended.score.lm_log == -1.0
    assert extended.score.is_consistent()
    print("✅ Increment reproduced")


def test_extend_score_with_uniform_lm():
    """Full path: the entropy of the uniform two-token LM is ln 2"""
    decoder = stub_decoder(alpha=0.5, beta=0.9)
    sentence = decoder.prepare('a', CandidateSet(per_position=(('a', 'b'),)))

    score = decoder.extend_score(decoder.initial_hypothesis(), Token('b', 1), sentence)

    multiplier = 1 + math.log(2)
    assert score.lm_log == pytest.approx(math.log(0.5), abs=1e-12)
    assert score.dm_log == pytest.approx(multiplier * 0.5 * -2.0, abs=1e-12)
    assert score.sm_log == pytest.approx(multiplier * 0.9 * -3.0, abs=1e-12)
    assert score.total == pytest.approx(math.log(0.5) - multiplier * 3.7, abs=1e-9)


@pytest.mark.parametrize('config, expected_dm, expected_sm', [
    ({'alpha': 0.0, 'beta': 0.0}, 0.0, 0.0),
    ({'dm_enabled': False, 'fr_enabled': False}, 0.0, 0.9 * -3.0),
    ({'fr_enabled': False}, 0.5 * -2.0, 0.9 * -3.0),
    ({'dm_enabled': False}, 0.0, (1 + math.log(2)) * 0.9 * -3.0),
])
def test_ablation_increments(config, expected_dm, expected_sm):
    """Switches and zero weights give the degenerate increments exactly"""
    decoder = stub_decoder(**config)
    sentence = decoder.prepare('a', CandidateSet(per_position=(('a', 'b'),)))

    score = decoder.extend_score(decoder.initial_hypothesis(), Token('b', 1), sentence)

    assert score.lm_log == pytest.approx(math.log(0.5), abs=1e-12)
    assert score.dm_log == pytest.approx(expected_dm, abs=1e-12)
    assert score.sm_log == pytest.approx(expected_sm, abs=1e-12)


def test_zero_weight_drops_impossible_term():
    """A zero weight removes its term even when the log-probability is -inf"""
    classifier = TableClassifier([{'a': 1.0}])
    decoder = MixtureDecoder(UniformLM(['a', 'b']), classifier, config=MixtureConfig(beta=0.0))
    sentence = decoder.prepare('a', CandidateSet(per_position=(('a', 'b'),)))

    score = decoder.extend_score(decoder.initial_hypothesis(), Token('b', 1), sentence)

    assert math.isfinite(score.total)


def test_extend_score_errors():
    decoder = stub_decoder()
    sentence = decoder.prepare('a', CandidateSet(per_position=(('a',),)))
    with pytest.raises(CandidateViolation):
        decoder.extend_score(decoder.initial_hypothesis(), Token('b', 1), sentence)

    lm = UniformLM(['a', 'b'], multi_tokens=['ab'])
    decoder = MixtureDecoder(lm, UniformClassifier('ab'))
    sentence = decoder.prepare('a', CandidateSet(per_position=(('a', 'b'),)))
    with pytest.raises(SpanOverflow):
        decoder.extend_score(decoder.initial_hypothesis(), Token('ab', 2), sentence)


def test_fr_rescales_uniformly_when_entropy_is_constant():
    """With a constant-entropy LM, FR multiplies every mixture term by 1 + ln V"""
    lm = UniformLM(list('abc'))
    classifier = RandomClassifier('abc', seed=3)
    distortion = DistortionModel(resources=SMALL_RESOURCES)
    with_fr = MixtureDecoder(lm, classifier, distortion, MixtureConfig(fr_enabled=True))
    without_fr = with_fr.with_config(MixtureConfig(fr_enabled=False))
    candidates = CandidateSet(per_position=(('a', 'b', 'c'),) * 3)

    for output in ('abc', 'cab', 'bba'):
        scores = []
        for decoder in (with_fr, without_fr):
            sentence = decoder.prepare('abc', candidates)
            hyp = decoder.initial_hypothesis()
            for char in output:
                token = next(t for t in lm.vocabulary if t.chars == char)
                hyp = decoder._extend(hyp, token, sentence, *decoder._step_context(hyp))
            scores.append(hyp.score)
        fr_score, plain_score = scores
        multiplier = 1 + math.log(3)
        assert fr_score.lm_log == pytest.approx(plain_score.lm_log, abs=1e-12)
        assert fr_score.dm_log + fr_score.sm_log == pytest.approx(
            multiplier * (plain_score.dm_log + plain_score.sm_log), abs=1e-9
        )


def test_beam_matches_exhaustive_oracle_on_random_instances():
    """Beam search with K >= number of paths returns the oracle's output and total"""
    print("\n=== Testing oracle equivalence over 200 seeds ===")
    for seed in range(200):
        source, candidates, lm, classifier, config = random_instance(seed)
        decoder = MixtureDecoder(lm, classifier, DistortionModel(resources=SMALL_RESOURCES), config)
        paths = decoder.count_paths(decoder.prepare(source, candidates))
        decoder = decoder.with_config(config.with_overrides(beam_size=max(paths, 1)))

        best = decoder.beam_search(source, candidates)[0]
        oracle = decoder.exhaustive_search(source, candidates)

        assert best.output == oracle.output, f"seed {seed}"
        assert abs(best.score.total - oracle.score.total) <= 1e-9, f"seed {seed}"
        assert len(best.output) == len(source)
        assert best.score.is_consistent()
    print("✅ 200 seeds agree with the oracle")


def test_eighty_one_sequences():
    """n=4 with 3 single-character candidates per position"""
    lm = RandomMarkovLM(list('abc'), seed=11)
    decoder = MixtureDecoder(lm, RandomClassifier('abc', seed=11), DistortionModel(resources=SMALL_RESOURCES),
                             MixtureConfig(beam_size=81))
    candidates = CandidateSet(per_position=(('a', 'b', 'c'),) * 4)

    assert decoder.count_paths(decoder.prepare('abca', candidates)) == 81
    ranked = decoder.beam_search('abca', candidates)
    assert ranked[0].output == decoder.exhaustive_search('abca', candidates).output
    assert len(ranked) == 81
    totals = [r.score.total for r in ranked]
    assert totals == sorted(totals, reverse=True)


def test_ablation_ranking_equals_pure_lm():
    """dm off, fr off and beta=0 rank candidate sequences by LM log-probability alone"""
    for seed in range(20):
        lm = RandomMarkovLM(list('abc'), seed=seed)
        decoder = MixtureDecoder(lm, RandomClassifier('abc', seed=seed), config=MixtureConfig(
            beta=0.0, dm_enabled=False, fr_enabled=False, beam_size=27
        ))
        candidates = CandidateSet(per_position=(('a', 'b', 'c'),) * 3)

        def lm_logprob(output):
            state, total = lm.initial_state(), 0.0
            for char in output:
                token_id = 'abc'.index(char)
                total += lm.distribution(state)[token_id]
                state = lm.step(state, token_id)
            return total

        expected = min(
            (''.join(chars) for chars in itertools.product('abc', repeat=3)),
            key=lambda output: (-lm_logprob(output), output)
        )
        assert decoder.exhaustive_search('abc', candidates).output == expected
        assert decoder.beam_search('abc', candidates)[0].output == expected


def test_singleton_candidates_return_source():
    lm = RandomMarkovLM(list(ALPHABET), ['ab'], seed=5)
    decoder = MixtureDecoder(lm, RandomClassifier(ALPHABET, seed=5))
    source = 'abcab'
    candidates = CandidateSet(per_position=tuple((char,) for char in source))
    for beam_size in (1, 3, 12):
        decoder = decoder.with_config(MixtureConfig(beam_size=beam_size))
        assert decoder.beam_search(source, candidates)[0].output == source
    assert decoder.exhaustive_search(source, candidates).output == source


def test_large_beta_follows_classifier_argmax():
    """A dominant classifier weight picks the per-position argmax within the candidates"""
    for seed in range(10):
        rng = np.random.default_rng(seed + 1000)
        source = ''.join(rng.choice(list(ALPHABET), size=5))
        classifier = RandomClassifier(ALPHABET, seed=seed)
        decoder = MixtureDecoder(RandomMarkovLM(list(ALPHABET), seed=seed), classifier,
                                 DistortionModel(resources=SMALL_RESOURCES),
                                 MixtureConfig(beta=1e6, beam_size=4, fr_enabled=False))
        candidates = CandidateSet(per_position=tuple(
            tuple(dict.fromkeys((char, 'a', 'c'))) for char in source
        ))

        output = decoder.beam_search(source, candidates)[0].output

        expected = ''.join(
            max(chars, key=lambda c, i=i: classifier.distribution_at(source, i)[c])
            for i, chars in enumerate(candidates.per_position)
        )
        assert output == expected


def test_fr_multipliers_stay_within_bounds():
    """Every applied multiplier lies in [1, 1 + ln V]; read back from the trace"""
    records = []
    lm = RandomMarkovLM(list(ALPHABET), ['ab', 'cd'], seed=2)
    decoder = MixtureDecoder(lm, RandomClassifier(ALPHABET, seed=2), DistortionModel(resources=SMALL_RESOURCES),
                             MixtureConfig(beam_size=5), trace_sink=records.append)
    candidates = CandidateSet(per_position=(('a', 'b'), ('b', 'c'), ('c', 'd'), ('d', 'a')))

    decoder.beam_search('abcd', candidates, trace_id='s1')

    upper = 1 + math.log(len(lm.vocabulary))
    multipliers = [m for record in records for hyp in record['beam'] for m in hyp['fr_multipliers']]
    assert multipliers
    assert all(1.0 <= m <= upper + 1e-12 for m in multipliers)
    assert [record['covered_chars'] for record in records] == [0, 1, 2, 3, 4]
    assert all(record['sentence_id'] == 's1' and record['event'] == 'frontier' for record in records)


def test_small_beam_can_miss_the_best_path():
    """Greedy K=1 locks onto 'a'; K=2 finds 'ba'"""
    lm = MarkovLM(['a', 'b'], {
        None: [0.6, 0.4],
        0: [0.5, 0.5],
        1: [0.95, 0.05]
    })
    decoder = MixtureDecoder(lm, UniformClassifier('ab'), config=MixtureConfig(
        alpha=0.0, beta=0.0, beam_size=1
    ))
    candidates = CandidateSet(per_position=(('a', 'b'), ('a', 'b')))

    greedy = decoder.beam_search('aa', candidates)[0]
    wide = decoder.with_config(decoder.config.with_overrides(beam_size=2)).beam_search('aa', candidates)[0]

    assert greedy.output == 'aa'
    assert greedy.score.total == pytest.approx(math.log(0.3), abs=1e-12)
    assert wide.output == 'ba'
    assert wide.score.total == pytest.approx(math.log(0.38), abs=1e-12)


def test_exhaustive_bound():
    decoder = MixtureDecoder(UniformLM(list('abc')), UniformClassifier('abc'),
                             config=MixtureConfig(exhaustive_bound=80))
    candidates = CandidateSet(per_position=(('a', 'b', 'c'),) * 4)
    with pytest.raises(SearchSpaceTooLarge):
        decoder.exhaustive_search('abca', candidates)


def test_build_candidates_policies():
    """Identity only, classifier top-1, and the shipped confusion sets"""
    identity_only = CandidatePolicy(top_k_classifier=0, include_confusion=False)
    candidates = build_candidates('abc', identity_only, SMALL_RESOURCES, UniformClassifier('xyz'))
    assert candidates.per_position == (('a',), ('b',), ('c',))

    peaked = TableClassifier([{'a': 0.1, 'b': 0.9}])
    candidates = build_candidates('a', CandidatePolicy(top_k_classifier=1, include_confusion=False),
                                  SimilarityResources.empty(), peaked)
    assert candidates.per_position == (('a', 'b'),)

    shipped = load_resources(**default_resource_paths())
    candidates = build_candidates('驾驶者', CandidatePolicy(top_k_classifier=0), shipped)
    assert '证' in candidates.per_position[2]
    assert candidates.per_position[2][0] == '者'
    assert all(len(chars) <= 16 for chars in candidates.per_position)


def test_build_candidates_without_identity():
    """Dropping the identity removes the source character unless nothing else is left"""
    policy = CandidatePolicy(top_k_classifier=1, include_confusion=False, include_identity=False)
    peaked = TableClassifier([{'a': 0.1, 'b': 0.9}, {'a': 0.8, 'b': 0.2}])
    assert build_candidates('ab', policy, SimilarityResources.empty(), peaked).per_position == (('b',), ('a',))

    empty_policy = CandidatePolicy(top_k_classifier=0, include_confusion=False, include_identity=False)
    candidates = build_candidates('ab', empty_policy, SimilarityResources.empty(), peaked)
    assert candidates.per_position == (('a',), ('b',))


def test_unknown_character_uses_unk_token():
    """A source character outside the LM vocabulary is emitted through the UNK token"""
    from services.ngram_lm_service import ngram_train
    lm = ngram_train(['ab', 'ba'], order=2, k=0.1)
    decoder = MixtureDecoder(lm, UniformClassifier('abz'))
    candidates = CandidateSet(per_position=(('a',), ('z',), ('b',)))

    best = decoder.beam_search('azb', candidates)[0]

    assert best.output == 'azb'
    assert best.tokens[1].token_id == lm.unk_token_id


def test_classifier_argmax_decode():
    classifier = TableClassifier([{'a': 0.2, 'b': 0.8}, {'c': 0.6, 'd': 0.4}])
    assert classifier_argmax_decode('ac', classifier) == 'bc'
