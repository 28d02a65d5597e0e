"""scikit-learn style wrapper around prompt construction and conversion."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import RecipeSample
from .llm import (
    BackendError,
    BootstrapFewShot,
    EvalConfig,
    ExternalTemplate,
    ZeroShot,
    bootstrap_fewshot,
    convert,
)
from .llm.prompts import InputVariant
from .metrics import score_sample


def check_samples(X, require_reference=False) -> list[RecipeSample]:
    """Coerce ``X`` into a list of ``RecipeSample``.

    Accepts samples, dicts with the sample fields, or bare recipe strings
    (which get positional ids and no ingredients or reference).
    """
    if isinstance(X, (RecipeSample, str, dict)):
        X = [X]
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"expected a sequence of recipe samples, got {type(X).__name__}") from None
    out = []
    for i, item in enumerate(items):
        if isinstance(item, RecipeSample):
            sample = item
        elif isinstance(item, dict):
            sample = RecipeSample(
                id=str(item.get("id", f"sample-{i}")),
                recipe_text=item.get("recipe_text", ""),
                ingredients_text=item.get("ingredients_text", ""),
                reference_cook=item.get("reference_cook", ""),
                category=item.get("category"),
            )
        elif isinstance(item, str):
            sample = RecipeSample(f"sample-{i}", item, "", "")
        else:
            raise TypeError(f"item {i}: cannot use {type(item).__name__} as a recipe sample")
        if require_reference and not sample.reference_cook.strip():
            raise ValueError(f"sample {sample.id!r} has no reference Cooklang")
        out.append(sample)
    if not out:
        raise ValueError("no samples given")
    return out


class CooklangConverter(BaseEstimator, TransformerMixin):
    """Converts plain recipes to Cooklang through a chat backend.

    ``fit`` only matters for ``strategy="few-shot"``, where it bootstraps
    demos from the training samples; other strategies are ready as soon
    as they are fitted on anything (or nothing).
    """

    def __init__(
        self,
        backend=None,
        model_id="echo",
        variant="method+ingredients+schema",
        strategy="zero-shot",
        template=None,
        k=4,
        trials=16,
        random_state=0,
        temperature=0.0,
        max_output_tokens=2048,
        max_workers=4,
    ):
        self.backend = backend
        self.model_id = model_id
        self.variant = variant
        self.strategy = strategy
        self.template = template
        self.k = k
        self.trials = trials
        self.random_state = random_state
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.max_workers = max_workers

    def _base_config(self, strategy):
        return EvalConfig(
            model_id=self.model_id,
            variant=InputVariant(self.variant),
            strategy=strategy,
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )

    def fit(self, X=None, y=None):
        if self.backend is None:
            raise ValueError("a backend is required")
        if self.strategy == "zero-shot":
            strategy = ZeroShot()
        elif self.strategy == "template":
            if isinstance(self.template, ExternalTemplate):
                strategy = self.template
            elif self.template:
                strategy = ExternalTemplate.load(self.template)
            else:
                raise ValueError("strategy 'template' needs a template path")
        elif self.strategy == "few-shot":
            train = check_samples(X, require_reference=True)
            strategy = bootstrap_fewshot(
                train,
                train,
                self._base_config(BootstrapFewShot(self.k, self.trials)),
                self.backend,
                trials=self.trials,
                k=self.k,
                seed=self.random_state,
            )
        else:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        self.config_ = self._base_config(strategy)
        return self

    def convert_many(self, X):
        """ConversionResult per sample, or the BackendError it raised."""
        check_is_fitted(self, "config_")
        samples = check_samples(X)

        def one(sample):
            try:
                return convert(sample, self.config_, self.backend)
            except BackendError as exc:
                return exc

        if self.max_workers <= 1 or len(samples) == 1:
            return [one(s) for s in samples]
        with ThreadPoolExecutor(self.max_workers) as pool:
            return list(pool.map(one, samples))

    def transform(self, X):
        results = self.convert_many(X)
        for r in results:
            if isinstance(r, BackendError):
                raise r
        return [r.candidate_cook for r in results]

    def predict(self, X):
        return self.transform(X)

    def score(self, X, y=None):
        """Mean ROUGE-L against the samples' references; failures count 0."""
        samples = check_samples(X, require_reference=True)
        total = Fraction(0)
        for sample, result in zip(samples, self.convert_many(samples)):
            if not isinstance(result, BackendError):
                total += Fraction(score_sample(sample.reference_cook, result.candidate_cook).rouge_l)
        return float(total / len(samples))
