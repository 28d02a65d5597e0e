"""Command-line front end: ``cookbench <command> ...``.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cooklang import read_cook, validate
from .corpus import CorpusValidationError, ManifestError, derive_ingredients, load_corpus, split
from .harness import RunManifest, emit_report, load_grid, run_grid
from .llm import BackendError, BootstrapFewShot, NoViableDemos, bootstrap_fewshot, cache_digest, convert, make_backend
from .llm.prompts import EvalConfig, parse_strategy
from .metrics import score_sample

EXIT_OK, EXIT_INVALID, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _read(path):
    try:
        return read_cook(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _backend_options(args):
    if args.replay and args.record:
        raise ConfigError("--replay and --record are mutually exclusive")
    if args.replay:
        return args.replay, "replay"
    if args.record:
        return args.record, "auto"
    return None, None


def cmd_validate(args):
    outcome = validate(_read(args.file))
    for d in outcome.diagnostics:
        print(f"{args.file}:{d}", file=sys.stderr)
    if args.format == "json":
        print(json.dumps({"ok": outcome.ok, "diagnostics": [str(d) for d in outcome.diagnostics]}))
    elif outcome.ok:
        print(f"{args.file}: ok")
    return EXIT_OK if outcome.ok else EXIT_INVALID


def cmd_score(args):
    ref, hyp = _read(args.ref), _read(args.hyp)
    if not validate(ref).ok:
        print(f"{args.ref}: reference does not parse", file=sys.stderr)
        return EXIT_INVALID
    report = score_sample(ref, hyp, Path(args.hyp).stem, wer_tokens=args.wer_tokens)
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2))
        return EXIT_OK
    for name in ("wer", "rouge_l", "ter"):
        print(f"{name} {getattr(report, name):.4f}")
    for name in ("ingredient_score", "unit_score", "amount_score"):
        print(f"{name} {getattr(report, name)}")
    print(f"parse_ok {str(report.parse_ok).lower()}")
    print(f"missing {', '.join(report.missing_ingredients)}")
    print(f"extra {', '.join(report.extra_ingredients)}")
    return EXIT_OK


def _load_config(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        strategy = parse_strategy(data.get("strategy", "zero-shot"), Path(path).parent)
        if isinstance(strategy, BootstrapFewShot):
            fewshot = data.get("fewshot", {})
            strategy = BootstrapFewShot(int(fewshot.get("k", 4)), int(fewshot.get("trials", 16)))
        return EvalConfig(
            model_id=data["model_id"],
            variant=data.get("variant", "method+ingredients+schema"),
            strategy=strategy,
            backend=data.get("backend", "http"),
            endpoint=data.get("endpoint"),
            api_key_env=data.get("api_key_env"),
            temperature=float(data.get("temperature", 0.0)),
            max_output_tokens=int(data.get("max_output_tokens", 2048)),
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad config {path}: {exc}") from None


def cmd_convert(args):
    corpus = load_corpus(args.manifest)
    by_id = {s.id: s for s in corpus}
    if args.sample not in by_id:
        raise ConfigError(f"no sample {args.sample!r} in corpus")
    config = _load_config(args.config)
    cache_dir, mode = _backend_options(args)
    backend = make_backend(config, corpus, cache_dir, mode)
    if isinstance(config.strategy, BootstrapFewShot):
        train = split(corpus, args.seed, args.train_fraction).train
        strategy = bootstrap_fewshot(
            train, train, config, backend, trials=config.strategy.trials, k=config.strategy.k, seed=args.seed
        )
        config = config.with_strategy(strategy)
    result = convert(by_id[args.sample], config, backend)
    if args.format == "json":
        print(json.dumps({"sample": args.sample, "candidate_cook": result.candidate_cook, "raw": result.raw,
                          "token_usage": result.token_usage, "retry_count": result.retry_count}, indent=2))
    else:
        print(result.candidate_cook)
    return EXIT_OK


def cmd_run(args):
    corpus = load_corpus(args.manifest)
    grid = load_grid(args.grid)
    train_fraction = args.train_fraction if args.train_fraction is not None else grid.train_fraction
    cache_dir, mode = _backend_options(args)
    digest = cache_digest(cache_dir) if cache_dir else None
    manifest = RunManifest.build(corpus, grid.configs, args.seed, train_fraction, digest, grid.wer_tokens)
    reports = run_grid(
        corpus,
        grid.configs,
        seed=args.seed,
        train_fraction=train_fraction,
        backend_factory=lambda c: make_backend(c, corpus, cache_dir, mode),
        max_workers=args.workers or grid.max_workers,
        wer_tokens=grid.wer_tokens,
    )
    formats = ("markdown", "csv", "json") if args.format == "all" else (args.format,)
    run_dir = emit_report(reports, args.out, manifest, formats)
    for r in reports:
        if r.note:
            print(f"warning: {r.config['model']} / {r.config['strategy']} / {r.config['variant']}: {r.note}",
                  file=sys.stderr)
    print(run_dir)
    return EXIT_OK


def cmd_derive(args):
    source = _read(args.file)
    if not validate(source).ok:
        print(f"{args.file}: does not parse", file=sys.stderr)
        return EXIT_INVALID
    print(derive_ingredients(source))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cookbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check that a .cook file parses")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="score a candidate .cook file against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--wer-tokens", choices=("words", "cooklang"), default="words")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_score)

    backend_flags = argparse.ArgumentParser(add_help=False)
    backend_flags.add_argument("--manifest", help="corpus manifest (default: bundled corpus)")
    backend_flags.add_argument("--seed", type=int, default=0, help="split and few-shot search seed")
    backend_flags.add_argument("--train-fraction", type=float, default=None)
    backend_flags.add_argument("--replay", metavar="CACHE_DIR", help="serve completions only from this cache")
    backend_flags.add_argument("--record", metavar="CACHE_DIR", help="call the backend and store completions here")

    p = sub.add_parser("convert", parents=[backend_flags], help="convert one corpus sample")
    p.add_argument("--sample", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("run", parents=[backend_flags], help="run an experiment grid and write reports")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", default="reports")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=("all", "markdown", "csv", "json"), default="all")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("derive-ingredients", help="print the ingredient list of a .cook file")
    p.add_argument("file")
    p.set_defaults(func=cmd_derive)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if getattr(args, "train_fraction", None) is None and args.command == "convert":
        args.train_fraction = 0.25
    try:
        return args.func(args)
    except (ConfigError, ManifestError, CorpusValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendError, NoViableDemos) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
