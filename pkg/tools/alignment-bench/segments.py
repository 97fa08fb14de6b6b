"""
Transcript segmentation within a provider's length budget.

Segments partition the input exactly: concatenating them in index order gives
back the original text, whitespace included.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import StrEnum


TOKEN_PATTERN = re.compile(r'\S+\s*')


class SegmentationError(ValueError):
    """Raised when a text cannot be segmented."""


class Unit(StrEnum):
    CHARACTERS = 'characters'
    WHITESPACE_TOKENS = 'whitespace_tokens'


@dataclass(frozen=True, slots=True)
class Segment:
    text: str
    index: int
    unit_count: int


def count_units(text: str, unit: Unit | str) -> int:
    if Unit(unit) is Unit.CHARACTERS:
        return len(text)
    return len(text.split())


def segment_text(text: str, max_units: int, unit: Unit | str = Unit.CHARACTERS) -> list[Segment]:
    """
    Split text greedily into segments of at most max_units units.

    Character budgets cut after the last whitespace inside the window and fall
    back to a hard cut when a single run is longer than the budget. Token
    budgets group whole tokens, each keeping its trailing whitespace.
    Whitespace-only text raises SegmentationError under the token unit: a
    segment must count at least one unit.
    """
    if not text:
        raise SegmentationError('cannot segment empty text.')
    if max_units < 1:
        raise SegmentationError(f'max_units must be >= 1, got {max_units}.')

    if Unit(unit) is Unit.CHARACTERS:
        pieces = split_characters(text, max_units)
    else:
        pieces = split_tokens(text, max_units)
    return [
        Segment(text=piece, index=index, unit_count=count_units(piece, unit))
        for index, piece in enumerate(pieces)
    ]


def split_characters(text: str, max_units: int) -> list[str]:
    pieces = []
    position = 0
    length = len(text)
    while position < length:
        if length - position <= max_units:
            pieces.append(text[position:])
            break
        window = text[position:position + max_units]
        cut = last_whitespace_index(window)
        end = position + (cut + 1 if cut >= 0 else max_units)
        pieces.append(text[position:end])
        position = end
    return pieces


def last_whitespace_index(window: str) -> int:
    for index in range(len(window) - 1, -1, -1):
        if window[index].isspace():
            return index
    return -1


def split_tokens(text: str, max_units: int) -> list[str]:
    """Group whole tokens; raises SegmentationError when the text is only whitespace."""
    matches = [match.group(0) for match in TOKEN_PATTERN.finditer(text)]
    if not matches:
        raise SegmentationError('text has no whitespace-delimited tokens.')
    # leading whitespace belongs to the first token
    prefix_length = len(text) - len(text.lstrip())
    matches[0] = text[:prefix_length] + matches[0]
    return [''.join(matches[start:start + max_units]) for start in range(0, len(matches), max_units)]
