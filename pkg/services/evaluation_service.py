"""
Correction metrics at sentence and character level, false positive rate,
and the per-error-type breakdown.

Definitions:
- a sentence is predicted positive iff prediction != source, gold positive
  iff reference != source, and correct iff predicted positive and
  prediction == reference;
- a character edit is predicted at i iff prediction[i] != source[i], gold iff
  reference[i] != source[i], and correct iff both and prediction[i] == reference[i];
- FPR = gold-negative sentences that were modified / gold-negative sentences.
"""

import json
import logging
from dataclasses import replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from exceptions import LengthMismatch
from models import ERROR_TYPES, DistortionType, MetricReport, TypeMetrics
from services.distortion_service import SimilarityResources, classify_pair

logger = logging.getLogger(__name__)

Triple = Tuple[str, str, str]


def _ratio(numerator: int, denominator: int, name: str, undefined: Set[str]) -> float:
    if denominator == 0:
        undefined.add(name)
        return 0.0
    return numerator / denominator


def _f1(precision: float, recall: float, name: str, undefined: Set[str]) -> float:
    if precision + recall == 0:
        undefined.add(name)
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _checked(instances: Iterable[Triple]) -> List[Triple]:
    checked = []
    for index, (source, reference, prediction) in enumerate(instances):
        if not len(source) == len(reference) == len(prediction):
            raise LengthMismatch(
                f"Instance {index}: source/reference/prediction lengths "
                f"{len(source)}/{len(reference)}/{len(prediction)} differ"
            )
        checked.append((source, reference, prediction))
    return checked


def evaluate(instances: Iterable[Triple]) -> MetricReport:
    """
    Sentence- and character-level P/R/F1 and FPR over (source, reference, prediction) triples.

    Raises:
        LengthMismatch: a triple has sequences of different lengths
    """
    counts = {
        'sentences': 0,
        'gold_positive': 0,
        'gold_negative': 0,
        'predicted_positive': 0,
        'correct_sentences': 0,
        'false_positive_sentences': 0,
        'char_gold_edits': 0,
        'char_predicted_edits': 0,
        'char_correct_edits': 0
    }
    for source, reference, prediction in _checked(instances):
        counts['sentences'] += 1
        modified = prediction != source
        if reference != source:
            counts['gold_positive'] += 1
        else:
            counts['gold_negative'] += 1
            if modified:
                counts['false_positive_sentences'] += 1
        if modified:
            counts['predicted_positive'] += 1
            if prediction == reference:
                counts['correct_sentences'] += 1

        for src_char, ref_char, pred_char in zip(source, reference, prediction):
            gold_edit = ref_char != src_char
            predicted_edit = pred_char != src_char
            counts['char_gold_edits'] += gold_edit
            counts['char_predicted_edits'] += predicted_edit
            counts['char_correct_edits'] += gold_edit and predicted_edit and pred_char == ref_char

    undefined: Set[str] = set()
    sentence_p = _ratio(counts['correct_sentences'], counts['predicted_positive'], 'sentence_precision', undefined)
    sentence_r = _ratio(counts['correct_sentences'], counts['gold_positive'], 'sentence_recall', undefined)
    char_p = _ratio(counts['char_correct_edits'], counts['char_predicted_edits'], 'char_precision', undefined)
    char_r = _ratio(counts['char_correct_edits'], counts['char_gold_edits'], 'char_recall', undefined)
    return MetricReport(
        sentence_precision=sentence_p,
        sentence_recall=sentence_r,
        sentence_f1=_f1(sentence_p, sentence_r, 'sentence_f1', undefined),
        char_precision=char_p,
        char_recall=char_r,
        char_f1=_f1(char_p, char_r, 'char_f1', undefined),
        fpr=_ratio(counts['false_positive_sentences'], counts['gold_negative'], 'fpr', undefined),
        counts=counts,
        undefined=frozenset(undefined)
    )


def evaluate_by_type(instances: Iterable[Triple], res: SimilarityResources) -> Dict[DistortionType, TypeMetrics]:
    """
    Character-level metrics per error type. Gold edits are binned by the type
    of (source, reference), predicted edits by the type of (source, prediction);
    the Unrelated bin is reported as "Others".
    """
    tallies = {error_type: {'gold': 0, 'predicted': 0, 'correct': 0} for error_type in ERROR_TYPES}
    for source, reference, prediction in _checked(instances):
        for src_char, ref_char, pred_char in zip(source, reference, prediction):
            if ref_char != src_char:
                gold_type = classify_pair(src_char, ref_char, res)
                tallies[gold_type]['gold'] += 1
                if pred_char == ref_char:
                    tallies[gold_type]['correct'] += 1
            if pred_char != src_char:
                tallies[classify_pair(src_char, pred_char, res)]['predicted'] += 1

    per_type = {}
    for error_type, tally in tallies.items():
        undefined: Set[str] = set()
        precision = _ratio(tally['correct'], tally['predicted'], 'precision', undefined)
        recall = _ratio(tally['correct'], tally['gold'], 'recall', undefined)
        per_type[error_type] = TypeMetrics(
            precision=precision,
            recall=recall,
            f1=_f1(precision, recall, 'f1', undefined),
            gold_edits=tally['gold'],
            predicted_edits=tally['predicted'],
            correct_edits=tally['correct'],
            undefined=frozenset(undefined)
        )
    return per_type


def evaluate_with_types(instances: Iterable[Triple], res: SimilarityResources) -> MetricReport:
    triples = _checked(instances)
    report = evaluate(triples)
    return replace(report, per_type=evaluate_by_type(triples, res))


def macro_average(reports: Sequence[MetricReport]) -> MetricReport:
    """
    Average P, R and FPR across sub-corpora; each F is the harmonic mean of
    the averaged P and R. Counts are summed.
    """
    if not reports:
        raise ValueError("macro_average needs at least one report")
    size = len(reports)

    def mean(name: str) -> float:
        return sum(getattr(report, name) for report in reports) / size

    undefined: Set[str] = set()
    sentence_p, sentence_r = mean('sentence_precision'), mean('sentence_recall')
    char_p, char_r = mean('char_precision'), mean('char_recall')
    counts: Dict[str, int] = {}
    for report in reports:
        for key, value in report.counts.items():
            counts[key] = counts.get(key, 0) + value
    return MetricReport(
        sentence_precision=sentence_p,
        sentence_recall=sentence_r,
        sentence_f1=_f1(sentence_p, sentence_r, 'sentence_f1', undefined),
        char_precision=char_p,
        char_recall=char_r,
        char_f1=_f1(char_p, char_r, 'char_f1', undefined),
        fpr=mean('fpr'),
        counts=counts,
        undefined=frozenset(undefined)
    )


def render_table(report: MetricReport, title: str = 'Correction metrics') -> str:
    """Human-readable summary table"""
    lines = [
        title,
        '=' * len(title),
        f"{'Level':<10}{'P':>8}{'R':>8}{'F1':>8}",
        f"{'Sentence':<10}{report.sentence_precision:>8.3f}{report.sentence_recall:>8.3f}{report.sentence_f1:>8.3f}",
        f"{'Character':<10}{report.char_precision:>8.3f}{report.char_recall:>8.3f}{report.char_f1:>8.3f}",
        f"FPR: {report.fpr:.3f}"
    ]
    if report.undefined:
        lines.append(f"Undefined (0/0, reported as 0): {', '.join(sorted(report.undefined))}")
    if report.per_type:
        lines.append('')
        lines.append(f"{'Type':<10}{'P':>8}{'R':>8}{'F1':>8}{'gold':>7}{'pred':>7}")
        for error_type, metrics in report.per_type.items():
            lines.append(
                f"{error_type.short_label:<10}{metrics.precision:>8.3f}{metrics.recall:>8.3f}"
                f"{metrics.f1:>8.3f}{metrics.gold_edits:>7}{metrics.predicted_edits:>7}"
            )
    return '\n'.join(lines)


def report_records(report: MetricReport, run_config: Optional[Dict[str, Any]] = None,
                   label: str = 'overall') -> List[Dict[str, Any]]:
    """Line-delimited structured form: one summary record, then one per error type"""
    summary = {'record': 'summary', 'label': label, **report.to_dict()}
    summary.pop('per_type', None)
    if run_config is not None:
        summary['run_config'] = run_config
    records = [summary]
    for error_type, metrics in (report.per_type or {}).items():
        records.append({'record': 'error_type', 'label': label, 'type': error_type.short_label, **metrics.to_dict()})
    return records


def dump_records(records: Iterable[Dict[str, Any]]) -> str:
    return ''.join(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n' for record in records)
