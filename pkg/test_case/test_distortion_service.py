"""
Test the distortion model: pair classification, table log-probabilities,
token decomposition and resource loading.
"""

import os
import sys
import math

import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from exceptions import ResourceError, SliceLengthMismatch
from models import DistortionType, Token
from services.distortion_service import (
    DistortionTable, SimilarityResources, classify_pair, confusion_set, default_resource_paths,
    distortion_logprob, load_resources, relation_set, token_distortion_logprob
)

SHIPPED = load_resources(**default_resource_paths())


def test_default_table_values():
    """Default probabilities and their natural logs"""
    table = DistortionTable()
    expected = {
        DistortionType.IDENTICAL: 0.962,
        DistortionType.SAME_PINYIN: 0.023,
        DistortionType.SIMILAR_PINYIN: 0.008,
        DistortionType.SIMILAR_SHAPE: 0.004,
        DistortionType.UNRELATED: 0.003
    }
    for distortion_type, probability in expected.items():
        assert table.probability(distortion_type) == probability
        assert abs(table.log_probability(distortion_type) - math.log(probability)) <= 1e-12


def test_table_from_string():
    table = DistortionTable.from_string('0.9, 0.05, 0.02, 0.02, 0.01')
    assert table.probability(DistortionType.SAME_PINYIN) == 0.05
    with pytest.raises(ValueError):
        DistortionTable.from_string('0.9,0.1')
    with pytest.raises(ValueError):
        DistortionTable.from_string('0.9,0.0,0.02,0.02,0.01')


def test_classify_pair_with_shipped_resources():
    """Precedence Identical > SamePinyin > SimilarPinyin > SimilarShape > Unrelated"""
    print("\n=== Testing pair classification ===")
    assert classify_pair('水', '水', SHIPPED) is DistortionType.IDENTICAL
    assert classify_pair('水', '睡', SHIPPED) is DistortionType.SAME_PINYIN
    assert classify_pair('饺', '觉', SHIPPED) is DistortionType.SAME_PINYIN
    assert classify_pair('者', '证', SHIPPED) is DistortionType.SIMILAR_PINYIN
    assert classify_pair('未', '末', SHIPPED) is DistortionType.SIMILAR_SHAPE
    assert classify_pair('水', '火', SimilarityResources.empty()) is DistortionType.UNRELATED
    print("✅ Pair types resolved")


def test_identical_ignores_resources():
    assert classify_pair('龘', '龘', SimilarityResources.empty()) is DistortionType.IDENTICAL


def test_pinyin_outranks_shape():
    res = SimilarityResources(pinyin={'a': {'ma'}, 'b': {'ma'}}, shape_sets={'a': {'b'}})
    assert classify_pair('a', 'b', res) is DistortionType.SAME_PINYIN


def test_shape_relation_is_symmetric():
    res = SimilarityResources(shape_sets={'未': {'末'}})
    assert classify_pair('末', '未', res) is DistortionType.SIMILAR_SHAPE
    assert '未' in SHIPPED.shape_sets['木']


def test_fuzzy_pairs_extend_similar_pinyin():
    """Two-edit syllables count as similar only through a fuzzy pair"""
    plain = SimilarityResources(pinyin={'x': {'qi'}, 'y': {'zhi'}})
    fuzzy = SimilarityResources(pinyin={'x': {'qi'}, 'y': {'zhi'}}, fuzzy_pairs=[('q', 'zh')])
    assert classify_pair('x', 'y', plain) is DistortionType.UNRELATED
    assert classify_pair('x', 'y', fuzzy) is DistortionType.SIMILAR_PINYIN
    assert SHIPPED.similar_syllables('zhe', 'zheng')


def test_distortion_logprob():
    table = DistortionTable()
    assert distortion_logprob('水', '水', table, SHIPPED) == pytest.approx(-0.03874, abs=1e-5)
    assert distortion_logprob('水', '火', table, SimilarityResources.empty()) == pytest.approx(-5.809, abs=1e-3)
    assert distortion_logprob('水', '睡', table, SHIPPED) == pytest.approx(-3.772, abs=1e-3)


def test_token_distortion_decomposition():
    """Token log-probability equals the sum over its characters, and splits additively"""
    table = DistortionTable()
    assert token_distortion_logprob('水饺', Token('水饺', 0), table, SHIPPED) == 2 * math.log(0.962)
    assert token_distortion_logprob('水饺', Token('睡觉', 0), table, SHIPPED) == pytest.approx(
        2 * math.log(0.023), abs=1e-12
    )

    whole = token_distortion_logprob('驾驶者', Token('驾驶证', 0), table, SHIPPED)
    parts = (token_distortion_logprob('驾驶', Token('驾驶', 0), table, SHIPPED)
             + token_distortion_logprob('者', Token('证', 1), table, SHIPPED))
    assert whole == parts

    with pytest.raises(SliceLengthMismatch):
        token_distortion_logprob('水', Token('水饺', 0), table, SHIPPED)


def test_relation_and_confusion_sets():
    same = relation_set('水', DistortionType.SAME_PINYIN, SHIPPED)
    assert '睡' in same
    assert '水' not in same
    assert list(same) == sorted(same)

    confusion = confusion_set('者', SHIPPED)
    assert '证' in confusion
    assert '着' in confusion
    # same-pinyin members come before similar-pinyin ones
    assert confusion.index('这') < confusion.index('证')


def test_load_resources_errors(tmp_path):
    missing = tmp_path / 'nope.tsv'
    with pytest.raises(ResourceError) as excinfo:
        load_resources(str(missing))
    assert str(missing) in str(excinfo.value)

    bad = tmp_path / 'bad.tsv'
    bad.write_text('水 shui\n', encoding='utf-8')
    with pytest.raises(ResourceError):
        load_resources(str(bad))

    tones = tmp_path / 'tones.tsv'
    tones.write_text('水\tshuǐ\n', encoding='utf-8')
    with pytest.raises(ResourceError):
        load_resources(str(tones))


def test_load_resources_skips_comments(tmp_path):
    pinyin = tmp_path / 'pinyin.tsv'
    pinyin.write_text('# comment\n水\tshui\n睡\tshui\n\n谁\tshui,shei\n', encoding='utf-8')
    res = load_resources(str(pinyin))
    assert res.syllables('谁') == frozenset({'shui', 'shei'})
    assert set(res.alphabet) == {'水', '睡', '谁'}
