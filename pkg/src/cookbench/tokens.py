"""Token streams for the text metrics.

``word_tokenize`` is the plain word view used by WER and ROUGE-L. ``tokenize``
is the Cooklang-aware view used by TER: every ingredient, cookware item and
timer becomes one atomic token, so a wrong amount costs one substitution no
matter how many characters differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .cooklang import (
    CookwareRecord,
    IngredientRecord,
    ParseError,
    Text,
    parse,
    render_cookware,
    render_ingredient,
    render_timer,
)

STRIP_CHARS = ",.;:!?()"


class TokenKind(str, Enum):
    WORD = "word"
    INGREDIENT = "ingredient"
    COOKWARE = "cookware"
    TIMER = "timer"
    STEP_BOUNDARY = "step"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    surface: str
    payload: tuple | None = None  # (name, amount, unit) for marker tokens

    def __post_init__(self):
        marker = self.kind not in (TokenKind.WORD, TokenKind.STEP_BOUNDARY)
        if marker != (self.payload is not None):
            raise ValueError(f"{self.kind.value} token payload mismatch")
        if self.kind is not TokenKind.STEP_BOUNDARY and not self.surface:
            raise ValueError("empty token surface")

    def __str__(self):
        return self.surface or "<step>"


STEP = Token(TokenKind.STEP_BOUNDARY, "")


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[Token, ...]
    source_kind: str = "reference"

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    def count(self, kind: TokenKind) -> int:
        return sum(1 for t in self.tokens if t.kind is kind)


def word_tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and trim punctuation from each word.

    Marker characters stay inside words so broken Cooklang syntax still
    costs edits.

    >>> word_tokenize("Mash the potato.")
    ['mash', 'the', 'potato']
    """
    words = (w.strip(STRIP_CHARS) for w in text.lower().split())
    return [w for w in words if w]


def _marker_token(record):
    if isinstance(record, IngredientRecord):
        amount = record.amount.raw if record.amount else None
        return Token(
            TokenKind.INGREDIENT,
            render_ingredient(record),
            (record.name, amount, record.unit),
        )
    if isinstance(record, CookwareRecord):
        qty = record.quantity.raw if record.quantity else None
        return Token(TokenKind.COOKWARE, render_cookware(record), (record.name, qty, None))
    return Token(
        TokenKind.TIMER,
        render_timer(record),
        (record.name, record.duration.raw, record.unit),
    )


def tokenize(text: str, source_kind: str = "reference") -> TokenSequence:
    """Cooklang-aware tokens of ``text``.

    Each step contributes its words and marker tokens followed by one
    step-boundary token. Text that does not parse falls back to plain word
    tokens with no boundaries.
    """
    try:
        ast = parse(text)
    except ParseError:
        return TokenSequence(
            tuple(Token(TokenKind.WORD, w) for w in word_tokenize(text)), source_kind
        )
    out = []
    for step in ast.steps:
        for item in step.items:
            if isinstance(item, Text):
                out.extend(Token(TokenKind.WORD, w) for w in word_tokenize(item.text))
            else:
                out.append(_marker_token(ast.resolve(item)))
        out.append(STEP)
    return TokenSequence(tuple(out), source_kind)
