"""
Line-oriented readers and writers for the parallel corpus format:

    id TAB source [TAB reference]

UTF-8, one record per line, lines starting with '#' are comments.
"""

import io
import logging
import sys
from contextlib import contextmanager
from typing import IO, Iterable, Iterator, List, Optional, Union

from exceptions import CorpusFormatError, ResourceError
from models import CorrectionInstance

logger = logging.getLogger(__name__)

PathOrStream = Union[str, IO[str]]


def parse_record(line: str, line_number: int = 0) -> Optional[CorrectionInstance]:
    """
    Parse one corpus line.

    Returns None for blank and comment lines.

    Raises:
        CorpusFormatError: wrong number of columns or empty id/source
    """
    line = line.rstrip('\n').rstrip('\r')
    if not line.strip() or line.startswith('#'):
        return None

    fields = line.split('\t')
    if len(fields) not in (2, 3):
        raise CorpusFormatError(
            f"Line {line_number}: expected 2 or 3 TAB-separated fields, got {len(fields)}"
        )
    record_id, source = fields[0], fields[1]
    reference = fields[2] if len(fields) == 3 else None
    if not record_id:
        raise CorpusFormatError(f"Line {line_number}: empty id")
    if not source:
        raise CorpusFormatError(f"Line {line_number}: empty source for id '{record_id}'")
    return CorrectionInstance(source=source, reference=reference, id=record_id)


def format_record(inst: CorrectionInstance) -> str:
    fields = [inst.id, inst.source]
    if inst.reference is not None:
        fields.append(inst.reference)
    return '\t'.join(fields)


@contextmanager
def open_text(path_or_stream: PathOrStream, mode: str = 'r'):
    """Open a path ('-' means stdin/stdout) or pass an existing stream through"""
    if not isinstance(path_or_stream, str):
        yield path_or_stream
        return
    if path_or_stream == '-':
        stream = sys.stdin if 'r' in mode else sys.stdout
        yield stream
        return
    try:
        handle = io.open(path_or_stream, mode, encoding='utf-8', newline='\n' if 'w' in mode else None)
    except OSError as e:
        raise ResourceError(f"Cannot open '{path_or_stream}': {e.strerror}") from e
    try:
        yield handle
    finally:
        handle.close()


def iter_corpus(path_or_stream: PathOrStream) -> Iterator[CorrectionInstance]:
    """Lazily yield CorrectionInstance records, skipping comments and blank lines"""
    with open_text(path_or_stream) as stream:
        for line_number, line in enumerate(stream, start=1):
            inst = parse_record(line, line_number)
            if inst is not None:
                yield inst


def read_corpus(path_or_stream: PathOrStream) -> List[CorrectionInstance]:
    return list(iter_corpus(path_or_stream))


def iter_lines(path_or_stream: PathOrStream) -> Iterator[str]:
    """Yield raw text lines without their line terminator"""
    with open_text(path_or_stream) as stream:
        for line in stream:
            yield line.rstrip('\n').rstrip('\r')


def read_sentences(path_or_stream: PathOrStream) -> List[str]:
    """Read a plain one-sentence-per-line corpus, dropping blank and comment lines"""
    sentences = [line for line in iter_lines(path_or_stream) if line.strip() and not line.startswith('#')]
    logger.debug(f"Read {len(sentences)} sentences")
    return sentences


def write_corpus(instances: Iterable[CorrectionInstance], path_or_stream: PathOrStream,
                 header_comments: Iterable[str] = ()) -> int:
    """Write records in corpus format; returns the number of records written"""
    written = 0
    with open_text(path_or_stream, 'w') as stream:
        for comment in header_comments:
            stream.write(f"# {comment}\n")
        for inst in instances:
            stream.write(format_record(inst) + '\n')
            written += 1
    return written
