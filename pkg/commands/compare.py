"""
`compare`: mixture versus its components on a synthetic benchmark, plus the
beam-size scan of summed top-1 totals. Writes <output>.json and <output>.md.
"""

import logging
from typing import Any, Dict, List

from commands.common import (
    add_config_arguments, add_mixture_arguments, add_model_arguments, add_resource_arguments,
    apply_logging, build_components, parse_list, run_config_from_args, write_json
)
from commands.evaluate import load_reference_corpus
from services.batch_correction_service import batch_correction_service, classifier_corrector, decoder_corrector
from services.corpus_service import open_text, read_sentences
from services.evaluation_service import evaluate_with_types
from services.synth_service import synthesize

logger = logging.getLogger(__name__)

SYSTEMS = ('lm-only', 'classifier-argmax', 'mixture')


def register(subparsers) -> None:
    parser = subparsers.add_parser('compare', help='compare the mixture with its components and scan beam sizes')
    parser.add_argument('--corpus', help='existing reference corpus (synthesized from the clean corpus when omitted)')
    parser.add_argument('--clean', help='clean corpus for synthesis (default: the LM corpus)')
    parser.add_argument('--sentences', type=int, default=500, help='synthetic benchmark size (default 500)')
    parser.add_argument('--seed', type=int, help='random seed (default 42)')
    parser.add_argument('--error-rate', dest='error_rate', type=float,
                        help='per-character corruption probability (default 0.1)')
    parser.add_argument('--beam-sizes', dest='beam_sizes', default='1,2,4,8,12',
                        help='beam sizes for the monotonicity scan')
    parser.add_argument('-o', '--output', default='compare_report', help='report path without extension')
    add_config_arguments(parser)
    add_resource_arguments(parser)
    add_model_arguments(parser)
    add_mixture_arguments(parser)
    parser.set_defaults(func=run)


def render_markdown(payload: Dict[str, Any]) -> str:
    lines = ['# Mixture versus components', '', f"Benchmark: {payload['benchmark']['description']}", '',
             '| System | S-P | S-R | S-F | C-P | C-R | C-F | FPR |',
             '|---|---|---|---|---|---|---|---|']
    for name in SYSTEMS:
        report = payload['systems'][name]
        lines.append(
            f"| {name} | {report['sentence_precision']:.3f} | {report['sentence_recall']:.3f} "
            f"| {report['sentence_f1']:.3f} | {report['char_precision']:.3f} | {report['char_recall']:.3f} "
            f"| {report['char_f1']:.3f} | {report['fpr']:.3f} |"
        )
    lines += ['', f"Mixture S-F at least each component's: {'yes' if payload['direction_holds'] else 'NO'}", '',
              '## Beam-size scan', '',
              '| K | summed top-1 total | sentences that decreased | monotone |',
              '|---|---|---|---|']
    for row in payload['beam_scan']:
        lines.append(f"| {row['beam_size']} | {row['top1_total_sum']:.6f} | {row['sentence_decreases']} "
                     f"| {'yes' if row['monotone'] else 'NO'} |")
    return '\n'.join(lines) + '\n'


def run(args) -> int:
    run_config = run_config_from_args(
        args, ('corpus', 'clean', 'sentences', 'beam_sizes', 'output', 'preset')
    )
    apply_logging(run_config)
    beam_sizes = parse_list(args.beam_sizes, int, 'beam-sizes')
    components = build_components(run_config)

    if args.corpus:
        instances, _ = load_reference_corpus(args.corpus)
        benchmark = {'description': args.corpus, 'sentences': len(instances)}
    else:
        result = synthesize(
            read_sentences(args.clean or run_config.get('lm_corpus')),
            table=components.table,
            resources=components.resources,
            error_rate=run_config.get('error_rate'),
            seed=run_config.get('seed'),
            target_sentences=args.sentences
        )
        instances = result.instances
        benchmark = {
            'description': f"synthetic, seed {run_config.get('seed')}, {len(instances)} sentences, "
                           f"error rate {run_config.get('error_rate')}",
            **result.to_dict()
        }

    workers = run_config.get('max_workers')
    correctors = {
        'lm-only': decoder_corrector(components.decoder(run_config, 'lm-only')),
        'classifier-argmax': classifier_corrector(components.classifier),
        'mixture': decoder_corrector(components.decoder(run_config, args.preset))
    }
    systems: Dict[str, Dict[str, Any]] = {}
    for name in SYSTEMS:
        results = batch_correction_service.correct_records(instances, correctors[name], workers, progress_label=name)
        report = evaluate_with_types(
            [(inst.source, inst.reference, result.prediction) for inst, result in zip(instances, results)],
            components.resources
        )
        systems[name] = report.to_dict()
        logger.info(f"{name}: S-F {report.sentence_f1:.4f}, C-F {report.char_f1:.4f}, FPR {report.fpr:.4f}")

    mixture_f = systems['mixture']['sentence_f1']
    direction_holds = all(mixture_f >= systems[name]['sentence_f1'] for name in SYSTEMS[:-1])
    if not direction_holds:
        logger.warning("Mixture S-F is below a component on this benchmark")

    beam_scan: List[Dict[str, Any]] = batch_correction_service.scan_beam_sizes(
        instances, components.decoder(run_config, args.preset), beam_sizes, workers
    )
    payload = {
        'run_config': run_config.to_dict(),
        'benchmark': benchmark,
        'systems': systems,
        'direction_holds': direction_holds,
        'beam_scan': beam_scan
    }
    write_json(payload, args.output + '.json')
    with open_text(args.output + '.md', 'w') as stream:
        stream.write(render_markdown(payload))
    print(render_markdown(payload), end='')
    return 0
