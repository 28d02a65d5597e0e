"""Single-sample conversion and few-shot demo selection."""

from __future__ import annotations

import random
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction

from ..cooklang import ParseError, parse, validate
from ..metrics import rouge_l, scoring_text
from ..tokens import word_tokenize
from .backends import BackendError, ChatRequest
from .prompts import Demo, EvalConfig, FewShot, ZeroShot, build_prompt

_LABEL = re.compile(r"^\s*cooklang\s*:\s*", re.IGNORECASE)
_PRELUDE = re.compile(r"^(here\b|sure\b|certainly\b|below\b|the following\b|okay\b|ok\b).*:\s*$", re.IGNORECASE)


class EmptyCompletion(BackendError):
    pass


class NoViableDemos(RuntimeError):
    pass


def extract_cooklang(raw: str) -> str:
    """Pull the Cooklang body out of a chat completion.

    Removes a code fence around the answer, a ``cooklang:`` label, and
    chatty lead-in lines before the first line that looks like recipe text.

    >>> extract_cooklang("Here is the recipe:\\n@salt")
    '@salt'
    """
    text = raw.replace("\r\n", "\n").strip()
    # a fenced block anywhere wins over surrounding chatter
    fenced = re.search(r"(`{3,}|~{3,})[^\n]*\n(.*?)\n?\s*\1", text, re.DOTALL)
    if fenced:
        text = fenced.group(2)
    lines = text.split("\n")
    while lines and not lines[0].strip():
        lines.pop(0)
    if lines and _LABEL.match(lines[0]):
        rest = _LABEL.sub("", lines[0], count=1)
        lines[0] = rest
        if not rest.strip():
            lines.pop(0)
    # drop lead-in lines with no markup that end in a colon
    while len(lines) > 1 and _PRELUDE.match(lines[0].strip()) and not any(m in lines[0] for m in "@#~"):
        lines.pop(0)
        while lines and not lines[0].strip():
            lines.pop(0)
    return "\n".join(lines).strip()


@dataclass
class ConversionResult:
    candidate_cook: str
    raw: str
    latency: float
    token_usage: dict = field(default_factory=dict)
    retry_count: int = 0


def convert(sample, config: EvalConfig, backend) -> ConversionResult:
    bundle = build_prompt(sample, config)
    request = ChatRequest(config.model_id, bundle.messages, config.temperature, config.max_output_tokens)
    start = time.perf_counter()
    completion = backend.complete(request)
    latency = time.perf_counter() - start
    candidate = extract_cooklang(completion.text)
    if not candidate:
        raise EmptyCompletion(f"sample {sample.id!r}: blank completion", retries=completion.retries)
    return ConversionResult(candidate, completion.text, latency, completion.usage, completion.retries)


def _dev_rouge(sample, candidate):
    ref = word_tokenize(scoring_text(parse(sample.reference_cook)))
    try:
        hyp = word_tokenize(scoring_text(parse(candidate)))
    except ParseError:
        hyp = word_tokenize(candidate)
    return rouge_l(ref, hyp)


def bootstrap_fewshot(train, dev, config: EvalConfig, backend, trials: int = 16, k: int = 4, seed: int = 0) -> FewShot:
    """Random search over demo sets drawn from ``train``.

    Every trial samples ``k`` training samples, keeps those whose zero-shot
    output from the model validates as Cooklang, and scores the surviving
    set by mean ROUGE-L over ``dev``. The best set wins; ties go to the
    earlier trial.
    """
    train, dev = list(train), list(dev)
    if not train or not dev:
        raise ValueError("bootstrap needs non-empty train and dev sets")
    if trials < 1 or k < 1:
        raise ValueError("trials and k must be at least 1")

    zero = config.with_strategy(ZeroShot())
    viable = {}

    def is_viable(sample):
        if sample.id not in viable:
            try:
                viable[sample.id] = validate(convert(sample, zero, backend).candidate_cook).ok
            except BackendError:
                viable[sample.id] = False
        return viable[sample.id]

    rng = random.Random(seed)
    best, best_score = None, None
    for _ in range(trials):
        drawn = rng.sample(train, min(k, len(train)))
        kept = [s for s in drawn if is_viable(s)]
        if not kept:
            continue
        strategy = FewShot(tuple(Demo.from_sample(s) for s in kept))
        trial = config.with_strategy(strategy)
        total = Fraction(0)
        for sample in dev:
            try:
                total += Fraction(_dev_rouge(sample, convert(sample, trial, backend).candidate_cook))
            except BackendError:
                pass
        score = total / len(dev)
        if best is None or score > best_score:
            best, best_score = strategy, score
    if best is None:
        raise NoViableDemos(f"none of {trials} trials produced a demo whose output validates")
    return best
