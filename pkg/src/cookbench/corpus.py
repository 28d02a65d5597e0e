"""Recipe dataset loading, ingredient-field derivation and train/test splits.

A corpus is a JSON-lines manifest, one sample per line::

    {"id": "soups-tomato-soup", "category": "soups",
     "recipe": "soups-tomato-soup/recipe.txt",
     "reference": "soups-tomato-soup/reference.cook"}

Paths are relative to the manifest's directory. An optional ``ingredients``
string overrides the list derived from the reference.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import warnings
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

from .cooklang import parse, read_cook, validate

CATEGORIES = ("baking", "breakfast", "dinners", "lunches", "soups")


class ManifestError(ValueError):
    pass


class CorpusValidationError(ValueError):
    def __init__(self, sample_id, reason):
        super().__init__(f"sample {sample_id!r}: {reason}")
        self.sample_id = sample_id


class DegenerateSplit(ValueError):
    pass


@dataclass(frozen=True)
class RecipeSample:
    id: str
    recipe_text: str
    ingredients_text: str
    reference_cook: str
    category: str | None = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[RecipeSample, ...]
    test: tuple[RecipeSample, ...]
    seed: int


def default_manifest() -> Path:
    """Path of the corpus bundled with the package."""
    return Path(str(resources.files("cookbench") / "data" / "corpus" / "manifest.jsonl"))


def derive_ingredients(reference_cook: str) -> str:
    """Comma-separated ingredient names from a reference, first occurrence
    order, exact repeats dropped.

    >>> derive_ingredients("@potato{2} and @salt, then more @salt")
    'potato, salt'
    """
    names = dict.fromkeys(rec.name for rec in parse(reference_cook).ingredients)
    return ", ".join(names)


def _read_text(base, rel, sample_id, field):
    path = base / rel
    if not path.is_file():
        raise ManifestError(f"sample {sample_id!r}: {field} file not found: {path}")
    if path.suffix == ".cook":
        return read_cook(path)
    return path.read_text(encoding="utf-8").replace("\r\n", "\n").strip()


def load_corpus(manifest_path=None, self_check: bool = False) -> list[RecipeSample]:
    """Load and validate every sample listed in ``manifest_path``.

    Samples come back sorted by id. With ``self_check`` each reference is
    also scored against itself and must come out perfect.
    """
    manifest_path = Path(manifest_path) if manifest_path is not None else default_manifest()
    if not manifest_path.is_file():
        raise ManifestError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    samples = {}
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{manifest_path}:{lineno}: invalid JSON ({exc.msg})") from None
            missing = [k for k in ("id", "recipe", "reference") if k not in row]
            if missing:
                raise ManifestError(f"{manifest_path}:{lineno}: missing fields {missing}")
            sample_id = str(row["id"])
            if sample_id in samples:
                raise ManifestError(f"duplicate sample id {sample_id!r}")

            reference = _read_text(base, row["reference"], sample_id, "reference")
            outcome = validate(reference)
            if not outcome.ok:
                raise CorpusValidationError(
                    sample_id, "reference does not parse: " + "; ".join(map(str, outcome.diagnostics))
                )
            recipe_text = _read_text(base, row["recipe"], sample_id, "recipe")
            if not recipe_text:
                raise CorpusValidationError(sample_id, "empty recipe text")
            ingredients = row.get("ingredients")
            if ingredients is None:
                ingredients = derive_ingredients(reference)
            samples[sample_id] = RecipeSample(
                id=sample_id,
                recipe_text=recipe_text,
                ingredients_text=ingredients,
                reference_cook=reference,
                category=row.get("category"),
            )

    if not samples:
        warnings.warn(f"manifest {manifest_path} lists no samples", stacklevel=2)
    corpus = [samples[k] for k in sorted(samples)]
    if self_check:
        _self_check(corpus)
    return corpus


def _self_check(corpus):
    from .metrics import score_sample

    for sample in corpus:
        report = score_sample(sample.reference_cook, sample.reference_cook, sample.id)
        perfect = (
            report.wer == 0
            and report.ter == 0
            and report.rouge_l == 1
            and report.ingredient_score == report.unit_score == report.amount_score == 1
        )
        if not perfect:
            raise CorpusValidationError(sample.id, "reference does not score perfectly against itself")


def corpus_digest(corpus) -> str:
    payload = json.dumps([s.to_dict() for s in corpus], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def split(corpus, seed: int, train_fraction: float) -> CorpusSplit:
    """Seeded shuffle of the sorted ids, then a prefix split.

    The train side gets ``floor(n * train_fraction)`` samples, clamped so
    neither side is empty.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    ordered = sorted(corpus, key=lambda s: s.id)
    if len(ordered) < 2:
        raise DegenerateSplit(f"cannot split {len(ordered)} sample(s) into train and test")
    random.Random(seed).shuffle(ordered)
    n_train = min(max(math.floor(len(ordered) * train_fraction), 1), len(ordered) - 1)
    return CorpusSplit(tuple(ordered[:n_train]), tuple(ordered[n_train:]), seed)
