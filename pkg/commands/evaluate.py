"""`eval` subcommand: decode (or read predictions for) a reference corpus and report correction metrics"""

import logging
from typing import Dict, List, Tuple

from commands.common import (
    add_config_arguments, add_mixture_arguments, add_model_arguments, add_resource_arguments,
    apply_logging, build_components, build_resources, run_config_from_args, write_jsonl
)
from exceptions import CorpusFormatError, CorrectionError, EmptyCorpus, LengthMismatch
from models import CorrectionInstance, validate_instance
from services.batch_correction_service import batch_correction_service, decoder_corrector
from services.corpus_service import iter_lines, open_text, read_corpus
from services.evaluation_service import evaluate_with_types, render_table, report_records

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('eval', help='evaluate correction quality on a reference corpus')
    parser.add_argument('corpus', help='corpus with references (id TAB source TAB reference)')
    parser.add_argument('--predictions',
                        help='score existing predictions (id TAB prediction) instead of decoding')
    parser.add_argument('--report', help='write the structured report as JSON lines to this file')
    parser.add_argument('--save-predictions', dest='save_predictions',
                        help='write decoded predictions (id TAB prediction) to this file')
    add_config_arguments(parser)
    add_resource_arguments(parser)
    add_model_arguments(parser)
    add_mixture_arguments(parser)
    parser.set_defaults(func=run)


def read_predictions(path: str) -> Dict[str, str]:
    predictions: Dict[str, str] = {}
    for line_number, line in enumerate(iter_lines(path), start=1):
        if not line.strip() or line.startswith('#'):
            continue
        fields = line.split('\t')
        if len(fields) != 2:
            raise CorpusFormatError(f"{path}:{line_number}: expected 'id TAB prediction'")
        predictions[fields[0]] = fields[1]
    return predictions


def load_reference_corpus(path: str) -> Tuple[List[CorrectionInstance], List[Dict[str, str]]]:
    """
    Read a reference corpus, skipping (and reporting) records that fail validation.

    Raises:
        EmptyCorpus: the corpus has no records
        CorpusFormatError: a record has no reference column
    """
    instances = read_corpus(path)
    if not instances:
        raise EmptyCorpus(f"Corpus {path} has no records")
    missing = [inst.id for inst in instances if not inst.has_reference]
    if missing:
        raise CorpusFormatError(
            f"{path}: {len(missing)} records have no reference column (first id '{missing[0]}')"
        )

    valid, skipped = [], []
    for inst in instances:
        try:
            valid.append(validate_instance(inst))
        except CorrectionError as e:
            logger.warning(f"Skipping record {inst.id}: {e}")
            skipped.append({'id': inst.id, 'error': f"{type(e).__name__}: {e}"})
    return valid, skipped


def run(args) -> int:
    run_config = run_config_from_args(args, ('corpus', 'predictions', 'report', 'save_predictions', 'preset'))
    apply_logging(run_config)
    instances, skipped = load_reference_corpus(args.corpus)

    if args.predictions:
        resources = build_resources(run_config)
        given = read_predictions(args.predictions)
        scored = []
        for inst in instances:
            prediction = given.get(inst.id)
            if prediction is None:
                logger.warning(f"Skipping record {inst.id}: no prediction")
                skipped.append({'id': inst.id, 'error': 'missing prediction'})
            elif len(prediction) != len(inst.source):
                error = LengthMismatch(f"prediction has {len(prediction)} characters, source has {len(inst.source)}")
                logger.warning(f"Skipping record {inst.id}: {error}")
                skipped.append({'id': inst.id, 'error': f"LengthMismatch: {error}"})
            else:
                scored.append((inst, prediction))
    else:
        components = build_components(run_config)
        resources = components.resources
        decoder = components.decoder(run_config, args.preset)
        results = batch_correction_service.correct_records(
            instances, decoder_corrector(decoder), run_config.get('max_workers'), progress_label='eval'
        )
        scored = [(inst, result.prediction) for inst, result in zip(instances, results)]
        if args.save_predictions:
            with open_text(args.save_predictions, 'w') as stream:
                for inst, prediction in scored:
                    stream.write(f"{inst.id}\t{prediction}\n")

    report = evaluate_with_types([(inst.source, inst.reference, prediction) for inst, prediction in scored],
                                 resources)
    print(render_table(report, title=f"Correction metrics: {args.corpus}"))
    print(f"Evaluated records: {len(scored)}  Skipped records: {len(skipped)}")

    if args.report:
        records = report_records(report, run_config.to_dict(), label=args.corpus)
        records.append({'record': 'skipped', 'label': args.corpus, 'count': len(skipped), 'records': skipped})
        write_jsonl(records, args.report)
        logger.info(f"Report written to {args.report}")
    return 0
