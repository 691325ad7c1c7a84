"""`correct`: one corrected line per input line"""

import json
import logging
from contextlib import ExitStack
from typing import Iterator

from commands.common import (
    add_config_arguments, add_mixture_arguments, add_model_arguments, add_resource_arguments,
    apply_logging, build_components, run_config_from_args, write_json
)
from models import CorrectionInstance
from services.batch_correction_service import batch_correction_service, decoder_corrector
from services.corpus_service import iter_corpus, iter_lines, open_text

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser('correct', help='correct sentences read line by line')
    parser.add_argument('input', nargs='?', default='-', help="input file ('-' for stdin)")
    parser.add_argument('-o', '--output', default='-', help="output file ('-' for stdout)")
    parser.add_argument('--tsv', action='store_true',
                        help='input is in corpus format (id TAB source [TAB reference]); output is id TAB correction')
    parser.add_argument('--trace', help='write per-frontier beam traces as JSON lines to this file')
    add_config_arguments(parser)
    add_resource_arguments(parser)
    add_model_arguments(parser)
    add_mixture_arguments(parser)
    parser.set_defaults(func=run)


def _read_instances(path: str, tsv: bool) -> Iterator[CorrectionInstance]:
    if tsv:
        yield from iter_corpus(path)
        return
    for line_number, line in enumerate(iter_lines(path), start=1):
        yield CorrectionInstance(source=line, id=str(line_number))


def run(args) -> int:
    run_config = run_config_from_args(args, ('input', 'output', 'tsv', 'trace', 'preset'))
    apply_logging(run_config)
    logger.info(f"Run config: {json.dumps(run_config.to_dict(), ensure_ascii=False, sort_keys=True)}")

    components = build_components(run_config)
    records = failed = 0
    with ExitStack() as stack:
        trace_sink = None
        if args.trace:
            trace_stream = stack.enter_context(open_text(args.trace, 'w'))
            trace_stream.write(json.dumps({'event': 'run', 'run_config': run_config.to_dict()},
                                          ensure_ascii=False, sort_keys=True) + '\n')

            def trace_sink(record):
                trace_stream.write(json.dumps(record, ensure_ascii=False) + '\n')

        decoder = components.decoder(run_config, args.preset, trace_sink)
        output = stack.enter_context(open_text(args.output, 'w'))
        results = batch_correction_service.stream_corrections(
            _read_instances(args.input, args.tsv), decoder_corrector(decoder), run_config.get('max_workers')
        )
        for result in results:
            records += 1
            if result.status != 'success':
                failed += 1
            output.write(f"{result.id}\t{result.prediction}\n" if args.tsv else result.prediction + '\n')
            output.flush()

    logger.info(f"Corrected {records} lines ({failed} passed through after errors)")
    if args.output != '-':
        write_json({'run_config': run_config.to_dict(), 'records': records, 'failed_records': failed},
                   args.output + '.run.json')
    return 0
