import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from itertools import islice
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from dotenv import load_dotenv
from tqdm import tqdm

from exceptions import CorrectionError
from models import SCORE_TOLERANCE, CorrectionInstance, MetricReport, MixtureConfig, validate_instance
from services.decoder_service import MixtureDecoder, classifier_argmax_decode
from services.distortion_service import SimilarityResources
from services.evaluation_service import evaluate, evaluate_with_types
from services.scorer_contracts import PositionClassifier

# Load environment variables
load_dotenv()

# Set up logging
logger = logging.getLogger(__name__)

# Maps a record to (prediction, top-1 total score or None)
Corrector = Callable[[CorrectionInstance], Tuple[str, Optional[float]]]


def decoder_corrector(decoder: MixtureDecoder) -> Corrector:
    def correct(inst: CorrectionInstance) -> Tuple[str, Optional[float]]:
        best = decoder.beam_search(inst.source, trace_id=inst.id)[0]
        return best.output, best.score.total
    return correct


def classifier_corrector(classifier: PositionClassifier) -> Corrector:
    def correct(inst: CorrectionInstance) -> Tuple[str, Optional[float]]:
        return classifier_argmax_decode(inst.source, classifier), None
    return correct


@dataclass
class RecordResult:
    id: str
    source: str
    prediction: str
    status: str = 'success'
    top1_total: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'source': self.source,
            'prediction': self.prediction,
            'status': self.status,
            'top1_total': self.top1_total,
            'error': self.error
        }


@dataclass
class SweepCell:
    config: MixtureConfig
    status: str
    report: Optional[MetricReport] = None
    top1_total_sum: Optional[float] = None
    failed_records: int = 0
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config.to_dict(),
            'status': self.status,
            'report': self.report.to_dict() if self.report else None,
            'top1_total_sum': self.top1_total_sum,
            'failed_records': self.failed_records,
            'error': self.error
        }


class BatchCorrectionService:
    """
    Sentence-parallel correction of corpora with a bounded worker pool.
    Output order always matches input order; a failing record falls back to
    its source text and is reported without stopping the batch.
    """

    def __init__(self):
        """Initialize the batch correction service"""
        self.max_concurrent_workers = int(os.getenv('CSC_MIX_MAX_WORKERS', 4))
        self.chunk_size = int(os.getenv('CSC_MIX_CHUNK_SIZE', 256))
        self.quiet = os.getenv('CSC_MIX_QUIET', 'false').lower() == 'true'

        logger.info(f"Batch Correction Service initialized:")
        logger.info(f"  Max concurrent workers: {self.max_concurrent_workers}")
        logger.info(f"  Streaming chunk size: {self.chunk_size}")

    def _process_single_record(self, corrector: Corrector, inst: CorrectionInstance) -> RecordResult:
        try:
            validate_instance(inst)
            prediction, total = corrector(inst)
            return RecordResult(id=inst.id, source=inst.source, prediction=prediction, top1_total=total)
        except CorrectionError as e:
            logger.error(f"Record {inst.id} failed: {type(e).__name__}: {e}")
            return RecordResult(id=inst.id, source=inst.source, prediction=inst.source,
                                status='failed', error=f"{type(e).__name__}: {e}")

    def correct_records(self, instances: Sequence[CorrectionInstance], corrector: Corrector,
                        max_workers: Optional[int] = None, progress_label: Optional[str] = None) -> List[RecordResult]:
        """Correct a batch of records in parallel; results keep input order"""
        workers = max_workers or self.max_concurrent_workers
        results: List[Optional[RecordResult]] = [None] * len(instances)
        show_progress = progress_label is not None and not self.quiet

        with ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_index = {
                executor.submit(self._process_single_record, corrector, inst): index
                for index, inst in enumerate(instances)
            }
            completed = as_completed(future_to_index)
            if show_progress:
                completed = tqdm(completed, total=len(future_to_index), desc=progress_label, leave=False)
            for future in completed:
                results[future_to_index[future]] = future.result()

        failed = sum(1 for result in results if result.status != 'success')
        if failed:
            logger.warning(f"{failed} of {len(results)} records failed and were passed through unchanged")
        return results

    def stream_corrections(self, instances: Iterable[CorrectionInstance], corrector: Corrector,
                           max_workers: Optional[int] = None) -> Iterator[RecordResult]:
        """Correct an unbounded stream chunk by chunk, yielding results in input order"""
        iterator = iter(instances)
        while True:
            chunk = list(islice(iterator, self.chunk_size))
            if not chunk:
                return
            yield from self.correct_records(chunk, corrector, max_workers)

    def run_sweep(self, instances: Sequence[CorrectionInstance], decoder: MixtureDecoder,
                  grid: Sequence[MixtureConfig], resources: Optional[SimilarityResources] = None,
                  max_workers: Optional[int] = None) -> List[SweepCell]:
        """
        Decode and evaluate the corpus once per grid configuration. A cell that
        raises is marked failed and the sweep moves on. Cells are returned
        sorted by configuration.
        """
        if not grid:
            raise ValueError("Sweep grid must contain at least one configuration")
        with_reference = [inst for inst in instances if inst.reference is not None]

        cells: List[SweepCell] = []
        ordered_grid = sorted(grid, key=MixtureConfig.sort_key)
        progress = ordered_grid if self.quiet else tqdm(ordered_grid, desc='sweep', leave=False)
        for config in progress:
            logger.info(f"Sweep cell: {config.to_dict()}")
            try:
                cell_decoder = decoder.with_config(config)
                results = self.correct_records(with_reference, decoder_corrector(cell_decoder), max_workers)
                triples = [(inst.source, inst.reference, result.prediction)
                           for inst, result in zip(with_reference, results)]
                report = evaluate_with_types(triples, resources) if resources is not None else evaluate(triples)
                totals = [result.top1_total for result in results if result.top1_total is not None]
                cells.append(SweepCell(
                    config=config,
                    status='success',
                    report=report,
                    top1_total_sum=sum(totals),
                    failed_records=sum(1 for result in results if result.status != 'success')
                ))
            except Exception as e:
                logger.error(f"Sweep cell {config.to_dict()} failed: {type(e).__name__}: {e}")
                cells.append(SweepCell(config=config, status='failed', error=f"{type(e).__name__}: {e}"))
        return cells

    def scan_beam_sizes(self, instances: Sequence[CorrectionInstance], decoder: MixtureDecoder,
                        beam_sizes: Sequence[int], max_workers: Optional[int] = None) -> List[Dict[str, Any]]:
        """
        Decode the corpus at each beam size (ascending) and compare summed
        top-1 totals with the previous size. `sentence_decreases` counts
        sentences whose own top-1 total dropped.
        """
        rows: List[Dict[str, Any]] = []
        previous: Optional[List[Optional[float]]] = None
        for beam_size in sorted(set(beam_sizes)):
            config = decoder.config.with_overrides(beam_size=beam_size)
            results = self.correct_records(instances, decoder_corrector(decoder.with_config(config)), max_workers,
                                           progress_label=f"K={beam_size}")
            totals = [result.top1_total for result in results]
            row: Dict[str, Any] = {
                'beam_size': beam_size,
                'top1_total_sum': sum(total for total in totals if total is not None),
                'failed_records': sum(1 for total in totals if total is None),
                'sentence_decreases': 0,
                'monotone': True
            }
            if previous is not None:
                row['sentence_decreases'] = sum(
                    1 for before, after in zip(previous, totals)
                    if before is not None and after is not None and after < before - SCORE_TOLERANCE
                )
                tolerance = SCORE_TOLERANCE * max(1, len(totals))
                row['monotone'] = row['top1_total_sum'] >= rows[-1]['top1_total_sum'] - tolerance
                if not row['monotone']:
                    logger.warning(f"Summed top-1 total decreased from K={rows[-1]['beam_size']} to K={beam_size}")
            rows.append(row)
            previous = totals
        return rows


# Create a singleton instance
batch_correction_service = BatchCorrectionService()


def decode_corpus(instances: Sequence[CorrectionInstance], decoder: MixtureDecoder,
                  max_workers: Optional[int] = None) -> List[RecordResult]:
    """Top-1 predictions for a corpus in input order; failed records keep their source"""
    return batch_correction_service.correct_records(instances, decoder_corrector(decoder), max_workers)
