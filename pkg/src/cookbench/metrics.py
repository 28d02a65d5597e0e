"""Conversion-quality metrics.

Text metrics (WER, ROUGE-L, TER) compare token sequences. Identification
metrics compare ingredient lists by exact name, with whitespace trimming as
the only normalization.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .cooklang import IngredientRecord, ParseError, RecipeAst, parse, render
from .tokens import tokenize, word_tokenize

MAX_SHIFT_SIZE = 10
MAX_SHIFT_DIST = 50
MAX_SHIFTS = 50
EXACT_TER_LIMIT = 8


class EmptyReference(ValueError):
    """The reference has no tokens but the hypothesis does."""


def _empty_check(reference, hypothesis):
    if len(reference) == 0:
        if len(hypothesis) == 0:
            return True
        raise EmptyReference("reference is empty but hypothesis is not")
    return False


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Unit-cost Levenshtein distance between two sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def wer(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> float:
    """Word error rate: edit distance over the reference length.

    Values above 1 are possible when the hypothesis is much longer.

    >>> wer(["mash", "the", "potato"], ["mash", "potato"])
    0.3333333333333333
    """
    if _empty_check(reference, hypothesis):
        return 0.0
    return edit_distance(reference, hypothesis) / len(reference)


def rouge_l(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> float:
    """ROUGE-L F1 from the longest common subsequence."""
    if not reference and not hypothesis:
        return 1.0
    lcs = lcs_length(reference, hypothesis)
    if lcs == 0:
        return 0.0
    precision = lcs / len(hypothesis)
    recall = lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


# -- TER ---------------------------------------------------------------------


def _alignment(hyp, ref):
    """Edit distance plus the per-token error flags used to pick shifts.

    ``ref_start[j]`` is the number of hypothesis tokens the alignment has
    consumed before it reaches ``ref[j]``.
    """
    n, m = len(hyp), len(ref)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        row, up, h = d[i], d[i - 1], hyp[i - 1]
        for j in range(1, m + 1):
            row[j] = min(up[j] + 1, row[j - 1] + 1, up[j - 1] + (h != ref[j - 1]))
    hyp_err = [True] * n
    ref_err = [True] * m
    ref_start = [0] * (m + 1)
    i, j = n, m
    ref_start[m] = n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            if hyp[i - 1] == ref[j - 1]:
                hyp_err[i - 1] = ref_err[j - 1] = False
            i, j = i - 1, j - 1
            ref_start[j] = i
        elif j > 0 and d[i][j] == d[i][j - 1] + 1:
            j -= 1
            ref_start[j] = i
        else:
            i -= 1
    return d[n][m], hyp_err, ref_err, ref_start


def _shift_candidates(hyp, ref, hyp_err, ref_err, ref_start):
    out = []
    seen = {hyp}
    n, m = len(hyp), len(ref)
    for i in range(n):
        for j in range(max(0, i - MAX_SHIFT_DIST), min(m, i + MAX_SHIFT_DIST + 1)):
            length = 0
            while (
                length < MAX_SHIFT_SIZE
                and i + length < n
                and j + length < m
                and hyp[i + length] == ref[j + length]
            ):
                length += 1
                if not any(hyp_err[i : i + length]) or not any(ref_err[j : j + length]):
                    continue
                dest = ref_start[j]
                if i <= dest <= i + length:
                    continue
                block = hyp[i : i + length]
                rest = hyp[:i] + hyp[i + length :]
                if dest > i:
                    dest -= length
                moved = rest[:dest] + block + rest[dest:]
                if moved not in seen:
                    seen.add(moved)
                    out.append(moved)
    return out


def _batch_distance(candidates, ref):
    """Edit distance of every candidate (all the same length) to ``ref``."""
    hyps = np.asarray(candidates, dtype=np.int64)
    ref_arr = np.asarray(ref, dtype=np.int64)
    k, n = hyps.shape
    m = len(ref_arr)
    cols = np.arange(m + 1)
    prev = np.broadcast_to(cols, (k, m + 1)).copy()
    for i in range(1, n + 1):
        diag = prev[:, :-1] + (hyps[:, i - 1 : i] != ref_arr)
        up = prev[:, 1:] + 1
        best = np.empty((k, m + 1), dtype=np.int64)
        best[:, 0] = i
        np.minimum(diag, up, out=best[:, 1:])
        # left-to-right insertions: cur[j] = min_{q<=j}(best[q] + j - q)
        prev = np.minimum.accumulate(best - cols, axis=1) + cols
    return prev[:, -1]


def _ter_greedy_cost(hyp, ref):
    hyp = tuple(hyp)
    shifts = 0
    dist, hyp_err, ref_err, ref_start = _alignment(hyp, ref)
    while dist > 0 and shifts < MAX_SHIFTS:
        candidates = _shift_candidates(hyp, ref, hyp_err, ref_err, ref_start)
        if not candidates:
            break
        dists = _batch_distance(candidates, ref)
        best = int(np.argmin(dists))
        if dists[best] >= dist:
            break
        hyp = candidates[best]
        shifts += 1
        dist, hyp_err, ref_err, ref_start = _alignment(hyp, ref)
    return shifts + dist


def _all_shifts(seq):
    n = len(seq)
    for i in range(n):
        for length in range(1, n - i + 1):
            block = seq[i : i + length]
            rest = seq[:i] + seq[i + length :]
            for dest in range(len(rest) + 1):
                if dest != i:
                    yield rest[:dest] + block + rest[dest:]


def _ter_exact_cost(hyp, ref):
    hyp = tuple(hyp)
    common = sum((Counter(hyp) & Counter(ref)).values())
    floor = max(len(hyp), len(ref)) - common  # shifts never change the multiset
    best = edit_distance(hyp, ref)
    frontier, seen, depth = {hyp}, {hyp}, 0
    while frontier and depth + 1 + floor < best:
        depth += 1
        nxt = set()
        for state in frontier:
            for moved in _all_shifts(state):
                if moved not in seen:
                    seen.add(moved)
                    nxt.add(moved)
                    best = min(best, depth + edit_distance(moved, ref))
        frontier = nxt
    return best


def ter(reference: Sequence[Hashable], hypothesis: Sequence[Hashable], exact: bool = False) -> float:
    """Translation edit rate over token sequences.

    The default search is greedy: repeatedly apply the block shift that most
    reduces edit distance, then add the remaining edit distance, counting
    each shift as one edit. ``exact=True`` searches every shift sequence and
    is limited to sequences of at most 8 tokens.
    """
    if _empty_check(reference, hypothesis):
        return 0.0
    vocab = {}
    ref = tuple(vocab.setdefault(t, len(vocab)) for t in reference)
    hyp = tuple(vocab.setdefault(t, len(vocab)) for t in hypothesis)
    if exact:
        if max(len(ref), len(hyp)) > EXACT_TER_LIMIT:
            raise ValueError(f"exact TER is limited to {EXACT_TER_LIMIT} tokens per side")
        cost = _ter_exact_cost(hyp, ref)
    else:
        cost = _ter_greedy_cost(hyp, ref)
    return cost / len(ref)


# -- ingredient identification -------------------------------------------------


def _name(item) -> str:
    return (item.name if isinstance(item, IngredientRecord) else str(item)).strip()


def _pairs(reference, hypothesis):
    """Match each reference ingredient to the next unused same-name one."""
    pool = {}
    for rec in hypothesis:
        pool.setdefault(_name(rec), []).append(rec)
    for rec in reference:
        bucket = pool.get(_name(rec))
        yield rec, bucket.pop(0) if bucket else None


def ingredient_score(reference, hypothesis) -> int:
    """1 if every reference ingredient name occurs in the hypothesis.

    Counts matter: two reference ``salt`` entries need two in the hypothesis.
    Extra hypothesis ingredients do not lower the score.
    """
    missing = Counter(map(_name, reference)) - Counter(map(_name, hypothesis))
    return int(not missing)


def unit_score(reference, hypothesis) -> int:
    return int(all(h is not None and h.unit == r.unit for r, h in _pairs(reference, hypothesis)))


def amount_score(reference, hypothesis) -> int:
    def raw(rec):
        return rec.amount.raw if rec.amount is not None else None

    return int(all(h is not None and raw(h) == raw(r) for r, h in _pairs(reference, hypothesis)))


def ingredient_diff(reference, hypothesis) -> tuple[list[str], list[str]]:
    """Missing (false negative) and extra (false positive) ingredient names."""
    ref_names = [_name(r) for r in reference]
    hyp_names = [_name(h) for h in hypothesis]
    available = Counter(hyp_names)
    missing = []
    for name in ref_names:
        if available[name]:
            available[name] -= 1
        else:
            missing.append(name)
    available = Counter(ref_names)
    extra = []
    for name in hyp_names:
        if available[name]:
            available[name] -= 1
        else:
            extra.append(name)
    return missing, extra


# -- per-sample report -------------------------------------------------------

METRIC_FIELDS = ("wer", "rouge_l", "ter", "ingredient_score", "unit_score", "amount_score")


@dataclass(frozen=True)
class MetricReport:
    sample_id: str
    wer: float
    rouge_l: float
    ter: float
    ingredient_score: int
    unit_score: int
    amount_score: int
    parse_ok: bool
    missing_ingredients: list = field(default_factory=list)
    extra_ingredients: list = field(default_factory=list)
    failed: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(**data)


def scoring_text(ast: RecipeAst) -> str:
    """Canonical step text with metadata and comments left out."""
    return render(dataclasses.replace(ast, metadata={}, comments=()))


def score_sample(
    reference_cook: str,
    candidate_cook: str,
    sample_id: str = "",
    wer_tokens: str = "words",
    failed: bool = False,
) -> MetricReport:
    """Score one candidate against its reference.

    Text metrics run on the canonical step text of each side. A candidate
    that does not parse is scored on its raw text and gets 0 for every
    identification metric.
    """
    ref_ast = parse(reference_cook)
    ref_text = scoring_text(ref_ast)
    try:
        cand_ast = parse(candidate_cook)
    except ParseError:
        cand_ast = None
    cand_text = scoring_text(cand_ast) if cand_ast is not None else candidate_cook

    if wer_tokens == "words":
        wer_value = wer(word_tokenize(ref_text), word_tokenize(cand_text))
    elif wer_tokens == "cooklang":
        wer_value = wer(tokenize(ref_text), tokenize(cand_text, "hypothesis"))
    else:
        raise ValueError(f"unknown wer_tokens {wer_tokens!r}")

    ref_ings = list(ref_ast.ingredients)
    if cand_ast is not None and not failed:
        hyp_ings = list(cand_ast.ingredients)
        scores = (
            ingredient_score(ref_ings, hyp_ings),
            unit_score(ref_ings, hyp_ings),
            amount_score(ref_ings, hyp_ings),
        )
        missing, extra = ingredient_diff(ref_ings, hyp_ings)
    else:
        scores = (0, 0, 0)
        missing, extra = [_name(r) for r in ref_ings], []

    return MetricReport(
        sample_id=sample_id,
        wer=wer_value,
        rouge_l=rouge_l(word_tokenize(ref_text), word_tokenize(cand_text)),
        ter=ter(tokenize(ref_text), tokenize(cand_text, "hypothesis")),
        ingredient_score=scores[0],
        unit_score=scores[1],
        amount_score=scores[2],
        parse_ok=cand_ast is not None and not failed,
        missing_ingredients=missing,
        extra_ingredients=extra,
        failed=failed,
    )
