"""Cooklang documents: parsing, validation, canonical rendering and queries.

The parser is lenient. Only two things are structural errors: braces that do
not balance on a line, and a block comment ``[-`` that is never closed. All
other input parses, with anything that is not a well-formed marker kept as
plain text.

A step is a paragraph: consecutive non-blank lines, joined with single spaces.
Lines that are empty once comments are removed, and ``>>`` metadata lines,
separate paragraphs.
"""

from __future__ import annotations

import bisect
import re
import unicodedata
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Union

MARKERS = "@#~"
_PUNCT = ",.;:!?"

# braced form: optional name (first char not blank), then {body}
_BRACED = re.compile(
    r"(?P<name>[^\s@#~{}" + re.escape(_PUNCT) + r"][^@#~{}" + re.escape(_PUNCT) + r"]*)?"
    r"\{(?P<body>[^{}]*)\}"
)
_WORD = re.compile(r"[^\s@#~{}" + re.escape(_PUNCT) + r"]+")
_INT = re.compile(r"\d+")
_DEC = re.compile(r"\d+\.\d*|\d*\.\d+")
_FRAC = re.compile(r"(\d+)\s*/\s*(\d+)")
_SPACE = re.compile(r"\s+")


class ParseError(ValueError):
    """Structural error in a Cooklang document.

    ``line`` and ``column`` are 1-based and refer to the original source.
    ``diagnostics`` holds every structural problem found, the first of which
    is the one described by the exception itself.
    """

    def __init__(self, message, line, column, diagnostics=None):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.diagnostics = diagnostics or [Diagnostic(line, column, message)]


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}"


@dataclass(frozen=True)
class ValidationOutcome:
    ok: bool
    diagnostics: tuple[Diagnostic, ...] = ()

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class Quantity:
    """An amount as written.

    ``value`` is an ``int``, a ``Decimal``, a ``(numerator, denominator)``
    tuple for fractions (never reduced), or the raw string for anything else.
    """

    value: Union[int, Decimal, tuple, str]
    raw: str

    @classmethod
    def from_raw(cls, raw: str) -> "Quantity":
        raw = raw.strip()
        if _INT.fullmatch(raw):
            return cls(int(raw), raw)
        if _DEC.fullmatch(raw):
            return cls(Decimal(raw), raw)
        m = _FRAC.fullmatch(raw)
        if m and int(m.group(2)) != 0:
            return cls((int(m.group(1)), int(m.group(2))), raw)
        return cls(raw, raw)

    @property
    def kind(self) -> str:
        if isinstance(self.value, int):
            return "integer"
        if isinstance(self.value, Decimal):
            return "decimal"
        if isinstance(self.value, tuple):
            return "fraction"
        return "text"

    def __str__(self):
        return self.raw


@dataclass(frozen=True)
class IngredientRecord:
    name: str
    amount: Quantity | None = None
    unit: str | None = None

    def __post_init__(self):
        _check_name(self.name)
        if self.unit is not None and self.amount is None:
            raise ValueError(f"ingredient {self.name!r} has a unit but no amount")

    def __str__(self):
        return render_ingredient(self)


@dataclass(frozen=True)
class CookwareRecord:
    name: str
    quantity: Quantity | None = None

    def __post_init__(self):
        _check_name(self.name)

    def __str__(self):
        return render_cookware(self)


@dataclass(frozen=True)
class TimerRecord:
    duration: Quantity
    unit: str | None = None
    name: str | None = None

    def __post_init__(self):
        if self.name is not None:
            _check_name(self.name)

    def __str__(self):
        return render_timer(self)


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class IngredientRef:
    index: int


@dataclass(frozen=True)
class CookwareRef:
    index: int


@dataclass(frozen=True)
class TimerRef:
    index: int


StepItem = Union[Text, IngredientRef, CookwareRef, TimerRef]


@dataclass(frozen=True)
class Step:
    items: tuple[StepItem, ...]


@dataclass(frozen=True)
class Comment:
    """A comment attached to the step it sits in, or to the next step.

    ``anchor`` equals the number of steps when the comment trails the
    document.
    """

    kind: str  # "line" or "block"
    text: str
    anchor: int


@dataclass(frozen=True)
class RecipeAst:
    metadata: dict = field(default_factory=dict)
    steps: tuple[Step, ...] = ()
    comments: tuple[Comment, ...] = ()
    ingredients: tuple[IngredientRecord, ...] = ()
    cookware: tuple[CookwareRecord, ...] = ()
    timers: tuple[TimerRecord, ...] = ()

    def resolve(self, item: StepItem):
        """Return the record a step item points at (or the text itself)."""
        if isinstance(item, IngredientRef):
            return self.ingredients[item.index]
        if isinstance(item, CookwareRef):
            return self.cookware[item.index]
        if isinstance(item, TimerRef):
            return self.timers[item.index]
        return item.text


def _check_name(name):
    if not name or name != name.strip():
        raise ValueError(f"name must be non-empty and trimmed: {name!r}")
    bad = set(name) & set("@#~{}")
    if bad:
        raise ValueError(f"name {name!r} contains marker characters {sorted(bad)}")


# -- parsing -----------------------------------------------------------------


def _normalize(source: str) -> str:
    return unicodedata.normalize("NFC", source).replace("\r\n", "\n").replace("\r", "\n")


class _Locator:
    def __init__(self, text):
        self.starts = [0] + [i + 1 for i, ch in enumerate(text) if ch == "\n"]

    def __call__(self, offset):
        line = bisect.bisect_right(self.starts, offset) - 1
        return line + 1, offset - self.starts[line] + 1


def _strip_comments(text, locate):
    """Split ``text`` into comment-free text plus the comments it held.

    Returns ``(clean, origin, comments)`` where ``origin[k]`` is the source
    offset of ``clean[k]`` and comments are ``(kind, text, clean_offset)``.
    """
    clean, origin, comments = [], [], []
    i, n = 0, len(text)
    while i < n:
        if text.startswith("[-", i):
            end = text.find("-]", i + 2)
            if end < 0:
                line, col = locate(i)
                raise ParseError("unterminated block comment", line, col)
            comments.append(("block", text[i + 2 : end].strip(), len(clean)))
            i = end + 2
        elif text.startswith("--", i):
            end = text.find("\n", i)
            if end < 0:
                end = n
            comments.append(("line", text[i + 2 : end].strip(), len(clean)))
            i = end
        else:
            clean.append(text[i])
            origin.append(i)
            i += 1
    return "".join(clean), origin, comments


def _brace_errors(line, start, origin, locate):
    errors = []
    open_at = None
    for k, ch in enumerate(line):
        if ch == "{":
            if open_at is not None:
                errors.append((open_at, "unbalanced brace: '{' is not closed"))
            open_at = k
        elif ch == "}":
            if open_at is None:
                errors.append((k, "unbalanced brace: '}' without matching '{'"))
            open_at = None
    if open_at is not None:
        errors.append((open_at, "unbalanced brace: '{' is not closed"))
    out = []
    for k, message in errors:
        ln, col = locate(origin[start + k])
        out.append(Diagnostic(ln, col, message))
    return out


def _split_body(body):
    amount, sep, unit = body.partition("%")
    amount, unit = amount.strip(), unit.strip()
    if not amount:
        # a unit without an amount carries nothing we can keep
        return None, None
    return Quantity.from_raw(amount), (unit or None) if sep else None


def parse_marker(text: str, pos: int):
    """Parse the marker starting at ``text[pos]``.

    Returns ``(record, end)`` or ``None`` when the marker character is just
    text at this position.
    """
    kind = text[pos]
    m = _BRACED.match(text, pos + 1)
    if m:
        name = (m.group("name") or "").strip()
        body = m.group("body")
        record = None
        if kind == "@" and name:
            amount, unit = _split_body(body)
            record = IngredientRecord(name, amount, unit)
        elif kind == "#" and name:
            qty = body.strip()
            record = CookwareRecord(name, Quantity.from_raw(qty) if qty else None)
        elif kind == "~":
            duration, unit = _split_body(body)
            if duration is not None:
                record = TimerRecord(duration, unit, name or None)
        if record is not None:
            return record, m.end()
    if kind in "@#":
        m = _WORD.match(text, pos + 1)
        if m:
            record = IngredientRecord(m.group()) if kind == "@" else CookwareRecord(m.group())
            return record, m.end()
    return None


def _parse_step(text, ingredients, cookware, timers):
    items = []
    buf = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        parsed = parse_marker(text, pos) if ch in MARKERS else None
        if parsed is None:
            buf.append(ch)
            pos += 1
            continue
        record, pos = parsed
        if buf:
            items.append(Text("".join(buf)))
            buf = []
        if isinstance(record, IngredientRecord):
            items.append(IngredientRef(len(ingredients)))
            ingredients.append(record)
        elif isinstance(record, CookwareRecord):
            items.append(CookwareRef(len(cookware)))
            cookware.append(record)
        else:
            items.append(TimerRef(len(timers)))
            timers.append(record)
    if buf:
        items.append(Text("".join(buf)))
    return Step(tuple(items))


def parse(source: str) -> RecipeAst:
    """Parse Cooklang text into a :class:`RecipeAst`.

    Raises :class:`ParseError` on unbalanced braces or an unterminated block
    comment.

    >>> ast = parse("Mash @potato{2} with #potato masher{}")
    >>> [i.name for i in ast.ingredients], ast.ingredients[0].amount.raw
    (['potato'], '2')
    """
    text = _normalize(source)
    locate = _Locator(text)
    clean, origin, raw_comments = _strip_comments(text, locate)

    metadata = {}
    paragraphs = []  # list of lists of stripped lines
    line_anchor = []  # per clean line: anchor index for comments on it
    line_starts = []
    errors = []
    in_paragraph = False
    offset = 0
    for line in clean.split("\n"):
        line_starts.append(offset)
        stripped = line.strip()
        if stripped.startswith(">>"):
            key, _, value = stripped[2:].partition(":")
            metadata[key.strip()] = value.strip()
            in_paragraph = False
            line_anchor.append(len(paragraphs))
        elif not stripped:
            in_paragraph = False
            line_anchor.append(len(paragraphs))
        else:
            errors.extend(_brace_errors(line, offset, origin, locate))
            if not in_paragraph:
                paragraphs.append([])
                in_paragraph = True
            paragraphs[-1].append(stripped)
            line_anchor.append(len(paragraphs) - 1)
        offset += len(line) + 1

    if errors:
        first = errors[0]
        raise ParseError(first.message, first.line, first.column, errors)

    ingredients, cookware, timers = [], [], []
    steps = tuple(
        _parse_step(_SPACE.sub(" ", " ".join(lines)), ingredients, cookware, timers)
        for lines in paragraphs
    )
    comments = tuple(
        Comment(kind, body, line_anchor[bisect.bisect_right(line_starts, at) - 1])
        for kind, body, at in raw_comments
    )
    return RecipeAst(
        metadata=metadata,
        steps=steps,
        comments=comments,
        ingredients=tuple(ingredients),
        cookware=tuple(cookware),
        timers=tuple(timers),
    )


def validate(source: str) -> ValidationOutcome:
    """Check that ``source`` loads as a Cooklang document."""
    try:
        parse(source)
    except ParseError as exc:
        return ValidationOutcome(False, tuple(exc.diagnostics))
    return ValidationOutcome(True)


# -- rendering ---------------------------------------------------------------


def _quantity_body(amount, unit):
    if amount is None:
        return ""
    return f"{amount.raw}%{unit}" if unit is not None else amount.raw


def render_ingredient(record: IngredientRecord, suffix: str = "") -> str:
    """Render one ingredient; braces are dropped only when re-parsing
    ``result + suffix`` would give back the same record."""
    if record.amount is None and record.unit is None:
        bare = "@" + record.name
        if _reparses_to(bare, suffix, record):
            return bare
    return f"@{record.name}{{{_quantity_body(record.amount, record.unit)}}}"


def render_cookware(record: CookwareRecord, suffix: str = "") -> str:
    if record.quantity is None:
        bare = "#" + record.name
        if _reparses_to(bare, suffix, record):
            return bare
    body = record.quantity.raw if record.quantity is not None else ""
    return f"#{record.name}{{{body}}}"


def render_timer(record: TimerRecord) -> str:
    return f"~{record.name or ''}{{{_quantity_body(record.duration, record.unit)}}}"


def _reparses_to(bare, suffix, record):
    parsed = parse_marker(bare + suffix, 0)
    return parsed is not None and parsed == (record, len(bare))


def render_step(ast: RecipeAst, step: Step) -> str:
    out = ""
    # right to left, so each marker knows what follows it
    for item in reversed(step.items):
        if isinstance(item, Text):
            out = item.text + out
        elif isinstance(item, IngredientRef):
            out = render_ingredient(ast.ingredients[item.index], out) + out
        elif isinstance(item, CookwareRef):
            out = render_cookware(ast.cookware[item.index], out) + out
        else:
            out = render_timer(ast.timers[item.index]) + out
    return out


def _render_comment(comment):
    if comment.kind == "block":
        return f"[- {comment.text} -]"
    return f"-- {comment.text}"


def render(ast: RecipeAst) -> str:
    """Serialize ``ast`` to canonical Cooklang text (LF line endings).

    Metadata comes first, then one paragraph per step. Comments are emitted
    on their own lines just before the step they are anchored to.
    """
    blocks = []
    if ast.metadata:
        blocks.append("\n".join(f">> {k}: {v}" for k, v in ast.metadata.items()))
    by_anchor = {}
    for comment in ast.comments:
        by_anchor.setdefault(comment.anchor, []).append(_render_comment(comment))
    for i, step in enumerate(ast.steps):
        blocks.append("\n".join(by_anchor.pop(i, []) + [render_step(ast, step)]))
    trailing = [c for anchor in sorted(by_anchor) for c in by_anchor[anchor]]
    if trailing:
        blocks.append("\n".join(trailing))
    return "\n\n".join(blocks)


def render_plain(ast: RecipeAst) -> str:
    """Render the steps as ordinary prose, markup removed.

    Quantities read naturally: ``@flour{250%g}`` becomes ``250 g flour`` and
    ``~{25%minutes}`` becomes ``25 minutes``.
    """
    paragraphs = []
    for step in ast.steps:
        words = []
        for item in step.items:
            record = ast.resolve(item)
            if isinstance(record, str):
                words.append(record)
            elif isinstance(record, IngredientRecord):
                parts = [record.amount.raw if record.amount else None, record.unit, record.name]
                words.append(" ".join(p for p in parts if p))
            elif isinstance(record, CookwareRecord):
                words.append(record.name)
            else:
                words.append(" ".join(p for p in (record.duration.raw, record.unit) if p))
        paragraphs.append("".join(words))
    return "\n\n".join(paragraphs)


# -- queries -----------------------------------------------------------------


def extract_ingredients(ast: RecipeAst) -> list[IngredientRecord]:
    """Ingredients in order of appearance; repeats stay separate."""
    return list(ast.ingredients)


def extract_cookware(ast: RecipeAst) -> list[CookwareRecord]:
    return list(ast.cookware)


def extract_timers(ast: RecipeAst) -> list[TimerRecord]:
    return list(ast.timers)


def read_cook(path) -> str:
    """Read a ``.cook`` file as UTF-8 text with line endings normalized."""
    with open(path, encoding="utf-8", newline="") as fh:
        return _normalize(fh.read())
