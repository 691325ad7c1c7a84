"""
Builds pinyin resource files with pypinyin, as a full-coverage replacement
for the shipped hand-written table.
"""

import logging
from typing import IO, Dict, Iterable, List, Tuple, Union

import pypinyin

from services.corpus_service import open_text

logger = logging.getLogger(__name__)


def char_readings(char: str) -> List[str]:
    """Toneless lowercase readings of a character, heteronyms included, in pypinyin order"""
    readings = pypinyin.pinyin(char, style=pypinyin.Style.NORMAL, heteronym=True, errors='ignore')
    if not readings:
        return []
    seen = dict.fromkeys(
        reading.lower() for reading in readings[0]
        if reading.isascii() and reading.isalpha()
    )
    return list(seen)


def build_pinyin_table(chars: Iterable[str]) -> Tuple[Dict[str, List[str]], List[str]]:
    """Returns (char -> readings, characters pypinyin has no reading for)"""
    table: Dict[str, List[str]] = {}
    missing: List[str] = []
    for char in sorted(set(chars)):
        if char.isspace():
            continue
        readings = char_readings(char)
        if readings:
            table[char] = readings
        else:
            missing.append(char)
    return table, missing


def build_pinyin_file(chars: Iterable[str], path_or_stream: Union[str, IO[str]]) -> Dict[str, int]:
    """
    Write 'char TAB syllable[,syllable...]' lines for every character that
    has a reading. Characters without one are skipped and counted.
    """
    table, missing = build_pinyin_table(chars)
    with open_text(path_or_stream, 'w') as stream:
        stream.write(f"# pinyin table generated with pypinyin {pypinyin.__version__}\n")
        for char, readings in table.items():
            stream.write(f"{char}\t{','.join(readings)}\n")

    if missing:
        logger.warning(f"No pinyin reading for {len(missing)} characters: {''.join(missing[:20])}")
    logger.info(f"Wrote pinyin table with {len(table)} characters")
    return {'written': len(table), 'missing': len(missing)}
