"""Experiment grid execution, exact aggregation and report files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import __version__
from .corpus import corpus_digest, split
from .llm import (
    BackendError,
    BootstrapFewShot,
    EvalConfig,
    NoViableDemos,
    bootstrap_fewshot,
    convert,
    make_backend,
    parse_strategy,
)
from .llm.prompts import InputVariant
from .metrics import METRIC_FIELDS, MetricReport, score_sample

FAILURE_POLICY = "worst-case"
MEAN_FIELDS = tuple(f"mean_{m}" for m in ("wer", "rouge_l", "ter", "ingredient", "unit", "amount")) + (
    "parse_rate",
)
MARKDOWN_COLUMNS = (
    "Model", "Strategy", "Variant", "WER↓", "ROUGE-L↑", "TER↓",
    "Ingredient↑", "Units↑", "Amounts↑", "ParseRate",
)  # fmt: skip
REPORT_FILES = ("report.md", "report.csv", "report.json", "per_sample.json", "long.csv", "manifest.json")


class EmptyRun(ValueError):
    pass


class ReportWriteError(OSError):
    pass


def aggregate(per_sample) -> dict[str, float]:
    """Mean of every metric field plus the parse rate.

    Sums are kept as exact fractions, so the result does not depend on the
    order of ``per_sample``.
    """
    per_sample = list(per_sample)
    if not per_sample:
        raise EmptyRun("cannot aggregate an empty run")
    n = len(per_sample)
    means = {}
    for name, metric in zip(MEAN_FIELDS, METRIC_FIELDS):
        means[name] = float(sum((Fraction(getattr(r, metric)) for r in per_sample), Fraction(0)) / n)
    means["parse_rate"] = float(Fraction(sum(1 for r in per_sample if r.parse_ok), n))
    return means


@dataclass
class ConfigReport:
    config: dict
    n: int
    mean_wer: float
    mean_rouge_l: float
    mean_ter: float
    mean_ingredient: float
    mean_unit: float
    mean_amount: float
    parse_rate: float
    per_sample: list = field(default_factory=list)
    note: str | None = None

    @classmethod
    def from_samples(cls, config: dict, per_sample, note=None):
        per_sample = sorted(per_sample, key=lambda r: r.sample_id)
        return cls(config=config, n=len(per_sample), per_sample=per_sample, note=note, **aggregate(per_sample))

    def to_dict(self):
        out = asdict(self)
        out["per_sample"] = [r.to_dict() for r in self.per_sample]
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["per_sample"] = [MetricReport.from_dict(r) for r in data.get("per_sample", [])]
        return cls(**data)


# -- grid ----------------------------------------------------------------------


@dataclass
class Grid:
    configs: list
    train_fraction: float = 0.25
    max_workers: int = 4
    wer_tokens: str = "words"


def expand_grid(spec: dict, base_dir=None) -> Grid:
    """Models x strategies x variants from a grid description.

    ::

        {"models": [{"model_id": "gpt-4o", "backend": "http",
                     "endpoint": "https://api.openai.com/v1",
                     "api_key_env": "OPENAI_API_KEY"}],
         "strategies": ["zero-shot", "few-shot", "template:tuned.json"],
         "variants": ["method", "method+ingredients", "method+ingredients+schema"],
         "fewshot": {"k": 4, "trials": 16},
         "train_fraction": 0.25}
    """
    models = spec.get("models") or []
    if not models:
        raise ValueError("grid lists no models")
    fewshot = spec.get("fewshot", {})
    k, trials = int(fewshot.get("k", 4)), int(fewshot.get("trials", 16))
    strategies = []
    for name in spec.get("strategies", ["zero-shot"]):
        s = parse_strategy(name, base_dir)
        strategies.append(BootstrapFewShot(k, trials) if isinstance(s, BootstrapFewShot) else s)
    variants = [InputVariant(v) for v in spec.get("variants", [v.value for v in InputVariant])]
    configs = []
    for model in models:
        if isinstance(model, str):
            model = {"model_id": model}
        for strategy in strategies:
            for variant in variants:
                configs.append(
                    EvalConfig(
                        model_id=model["model_id"],
                        variant=variant,
                        strategy=strategy,
                        backend=model.get("backend", "http"),
                        endpoint=model.get("endpoint"),
                        api_key_env=model.get("api_key_env"),
                        temperature=float(spec.get("temperature", 0.0)),
                        max_output_tokens=int(spec.get("max_output_tokens", 2048)),
                    )
                )
    return Grid(
        configs,
        train_fraction=float(spec.get("train_fraction", 0.25)),
        max_workers=int(spec.get("max_workers", 4)),
        wer_tokens=spec.get("wer_tokens", "words"),
    )


def load_grid(path) -> Grid:
    path = Path(path)
    return expand_grid(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)


def _worst_case(sample, wer_tokens):
    return score_sample(sample.reference_cook, "", sample.id, wer_tokens=wer_tokens, failed=True)


def run_config(config, train, test, backend, seed=0, max_workers=4, wer_tokens="words") -> ConfigReport:
    note = None
    if isinstance(config.strategy, BootstrapFewShot):
        try:
            config = config.with_strategy(
                bootstrap_fewshot(
                    train, train, config, backend,
                    trials=config.strategy.trials, k=config.strategy.k, seed=seed,
                )  # fmt: skip
            )
        except NoViableDemos as exc:
            note = f"few-shot bootstrap failed: {exc}"
            return ConfigReport.from_samples(config.descriptor(), [_worst_case(s, wer_tokens) for s in test], note)

    def one(sample):
        try:
            result = convert(sample, config, backend)
        except BackendError:
            return _worst_case(sample, wer_tokens)
        return score_sample(sample.reference_cook, result.candidate_cook, sample.id, wer_tokens=wer_tokens)

    with ThreadPoolExecutor(max(1, max_workers)) as pool:
        per_sample = list(pool.map(one, test))
    failures = sum(r.failed for r in per_sample)
    if failures:
        note = f"{failures} conversion(s) failed and were scored worst-case"
    return ConfigReport.from_samples(config.descriptor(), per_sample, note)


def run_grid(
    corpus, configs, *, seed=0, train_fraction=0.25, backend_factory=None, max_workers=4, wer_tokens="words"
) -> list[ConfigReport]:
    """Score every config on the test side of one seeded split.

    Configs run one after another; samples within a config run on up to
    ``max_workers`` threads. Failed conversions stay in the means.
    """
    parts = split(corpus, seed, train_fraction)
    if backend_factory is None:
        def backend_factory(config):
            return make_backend(config, corpus)
    return [
        run_config(c, parts.train, parts.test, backend_factory(c), seed, max_workers, wer_tokens) for c in configs
    ]


# -- manifest and report files -----------------------------------------------------


@dataclass
class RunManifest:
    corpus_digest: str
    split_seed: int
    train_fraction: float
    n_train: int
    n_test: int
    configs: list
    transcript_cache_digest: str | None = None
    toolkit_version: str = __version__
    failure_policy: str = FAILURE_POLICY
    wer_tokens: str = "words"
    timestamp: str = ""

    @classmethod
    def build(cls, corpus, configs, seed, train_fraction, cache_digest=None, wer_tokens="words"):
        parts = split(corpus, seed, train_fraction)
        return cls(
            corpus_digest=corpus_digest(corpus),
            split_seed=seed,
            train_fraction=train_fraction,
            n_train=len(parts.train),
            n_test=len(parts.test),
            configs=[c.descriptor() for c in configs],
            transcript_cache_digest=cache_digest,
            wer_tokens=wer_tokens,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def to_dict(self):
        return asdict(self)

    @property
    def run_id(self) -> str:
        body = {k: v for k, v in self.to_dict().items() if k != "timestamp"}
        blob = json.dumps(body, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _row_key(report):
    c = report.config
    return c["model"], c["strategy"], c["variant"]


def _label(report):
    return " / ".join(_row_key(report))


def render_markdown(reports, manifest: RunManifest | None = None) -> str:
    lines = [
        "| " + " | ".join(MARKDOWN_COLUMNS) + " |",
        "|" + "|".join(" --- " for _ in MARKDOWN_COLUMNS) + "|",
    ]
    for r in reports:
        values = [getattr(r, f) for f in MEAN_FIELDS]
        lines.append("| " + " | ".join([*_row_key(r), *(f"{v:.4f}" for v in values)]) + " |")
    if manifest is not None:
        lines.append("")
        lines.append(
            f"Test samples: {manifest.n_test} of {manifest.n_train + manifest.n_test} "
            f"(split seed {manifest.split_seed}, train fraction {manifest.train_fraction}). "
            f"Failed conversions are scored {manifest.failure_policy}."
        )
    return "\n".join(lines) + "\n"


def _csv(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def render_csv(reports, manifest: RunManifest | None = None) -> str:
    seed = manifest.split_seed if manifest else ""
    rows = [["model", "strategy", "variant", "n", *MEAN_FIELDS, "split_seed"]]
    for r in reports:
        rows.append([*_row_key(r), r.n, *(repr(getattr(r, f)) for f in MEAN_FIELDS), seed])
    return _csv(rows)


def render_long_csv(reports) -> str:
    rows = [["config", "metric", "value"]]
    for r in reports:
        rows.extend([_label(r), f, repr(getattr(r, f))] for f in MEAN_FIELDS)
    return _csv(rows)


def _json(data):
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def emit_report(reports, out_dir, manifest: RunManifest, formats=("markdown", "csv", "json")) -> Path:
    """Write the run's report files to ``out_dir/<run-id>/`` and return it.

    ``long.csv`` and ``manifest.json`` are always written; the timestamp
    appears only in the manifest.
    """
    unknown = set(formats) - {"markdown", "csv", "json"}
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    files = {"long.csv": render_long_csv(reports), "manifest.json": _json(manifest.to_dict())}
    if "markdown" in formats:
        files["report.md"] = render_markdown(reports, manifest)
    if "csv" in formats:
        files["report.csv"] = render_csv(reports, manifest)
    if "json" in formats:
        files["report.json"] = _json({"run_id": manifest.run_id, "reports": [r.to_dict() for r in reports]})
        per_sample = [
            {"config": r.config, **s.to_dict()} for r in reports for s in r.per_sample
        ]
        files["per_sample.json"] = _json(per_sample)
    run_dir = Path(out_dir) / manifest.run_id
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (run_dir / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportWriteError(f"cannot write report to {run_dir}: {exc}") from exc
    return run_dir


def load_reports(path) -> list[ConfigReport]:
    """Read back the ``report.json`` written by :func:`emit_report`."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [ConfigReport.from_dict(r) for r in data["reports"]]
