"""Headline acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured value so
the run log doubles as an acceptance report.
"""

import dataclasses
import json
import re
import time
from fractions import Fraction
from pathlib import Path

import pytest

from cookbench.cli import main
from cookbench.cooklang import (
    CookwareRecord,
    IngredientRecord,
    IngredientRef,
    Quantity,
    Step,
    Text,
    TimerRecord,
    parse,
    render,
)
from cookbench.corpus import RecipeSample, load_corpus
from cookbench.harness import MARKDOWN_COLUMNS, expand_grid, render_markdown, run_grid
from cookbench.llm import (
    EchoBackend,
    EvalConfig,
    NoViableDemos,
    ScriptedBackend,
    ZeroShot,
    bootstrap_fewshot,
)
from cookbench.metrics import EmptyReference, rouge_l, score_sample, ter, wer

from oracles import all_pairs, brute_edit_cost, brute_rouge_l, brute_ter_cost

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"


@pytest.fixture
def verdict(capsys):
    def record(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return record


@pytest.fixture(scope="module")
def corpus():
    return load_corpus()


def test_parser_round_trip(corpus, verdict):
    start = time.perf_counter()
    mismatches = [s.id for s in corpus if parse(render(parse(s.reference_cook))) != parse(s.reference_cook)]
    elapsed = time.perf_counter() - start
    verdict(
        "parser round-trip",
        len(corpus) >= 32 and not mismatches and elapsed < 1.0,
        f"{len(corpus)} files, {len(mismatches)} mismatches, {elapsed:.3f}s (limit 1s)",
    )


SYNTAX_EXAMPLES = """\
@salt
@ground black pepper{}
@potato{2}
@bacon strips{1%kg}
@syrup{1/2%tbsp}

-- Don't burn the roux!
Mash @potato{2%kg} until smooth -- alternatively, boil 'em first, then mash 'em, then stick 'em in a stew.

#pot
#potato masher{}

~{25%minutes}
~eggs{3%minutes}
"""


def test_syntax_conformance(verdict):
    q = Quantity.from_raw
    ast = parse(SYNTAX_EXAMPLES)
    checks = {
        "salt without quantity": ast.ingredients[0] == IngredientRecord("salt"),
        "multi-word pepper": ast.ingredients[1] == IngredientRecord("ground black pepper"),
        "potato amount 2": ast.ingredients[2] == IngredientRecord("potato", q("2"))
        and ast.ingredients[2].amount.value == 2,
        "bacon strips amount 1": ast.ingredients[3].name == "bacon strips" and ast.ingredients[3].amount.value == 1,
        "cookware": ast.cookware == (CookwareRecord("pot"), CookwareRecord("potato masher")),
        "anonymous 25-minute timer": ast.timers[0] == TimerRecord(q("25"), "minutes")
        and ast.timers[0].duration.value == 25,
        "named eggs timer": ast.timers[1] == TimerRecord(q("3"), "minutes", "eggs"),
    }
    failed = [k for k, ok in checks.items() if not ok]
    verdict("syntax conformance", not failed, f"{len(checks) - len(failed)}/{len(checks)} records exact")


def test_metric_oracles(verdict):
    start = time.perf_counter()
    pairs = errors = rouge_gap = 0
    worst = 0.0
    for ref, hyp in all_pairs(8):
        pairs += 1
        if not ref:
            if hyp:
                with pytest.raises(EmptyReference):
                    wer(ref, hyp)
            else:
                assert wer(ref, hyp) == 0 and ter(ref, hyp, exact=True) == 0
            continue
        cost = brute_edit_cost(ref, hyp)
        if wer(ref, hyp) != cost / len(ref):
            errors += 1
        exact = ter(ref, hyp, exact=True)
        if exact != brute_ter_cost(ref, hyp) / len(ref):
            errors += 1
        if ter(ref, hyp) < exact:
            errors += 1
        gap = abs(rouge_l(ref, hyp) - brute_rouge_l(ref, hyp))
        worst = max(worst, gap)
        rouge_gap += gap > 1e-12
    elapsed = time.perf_counter() - start
    verdict(
        "metric oracles",
        errors == 0 and rouge_gap == 0 and elapsed < 60,
        f"{pairs} pairs, {errors} wer/ter mismatches, max rouge gap {worst:.1e}, {elapsed:.1f}s (limit 60s)",
    )


def test_echo_end_to_end(corpus, verdict):
    grid = expand_grid({
        "models": [{"model_id": "echo", "backend": "echo"}],
        "strategies": ["zero-shot", "few-shot"],
        "variants": ["method", "method+ingredients", "method+ingredients+schema"],
    })
    reports = run_grid(corpus, grid.configs, seed=0)
    perfect = [
        r.mean_wer == 0 and r.mean_rouge_l == 1 and r.mean_ter == 0
        and r.mean_ingredient == r.mean_unit == r.mean_amount == 1 and r.parse_rate == 1
        for r in reports
    ]
    verdict("echo end-to-end", len(reports) == 6 and all(perfect), f"{sum(perfect)}/6 configs perfect")


def drop_ingredients(reference, k):
    """Unmark every use of the first ``k`` distinct ingredient names."""
    ast = parse(reference)
    doomed = list(dict.fromkeys(r.name for r in ast.ingredients))[:k]
    steps = tuple(
        Step(tuple(
            Text(ast.ingredients[i.index].name)
            if isinstance(i, IngredientRef) and ast.ingredients[i.index].name in doomed else i
            for i in step.items
        ))
        for step in ast.steps
    )
    return render(dataclasses.replace(ast, steps=steps))


def substitute_per_step(reference):
    """Replace the first plain word of every step with a word no recipe uses."""
    ast = parse(reference)
    steps = []
    for step in ast.steps:
        items, done = list(step.items), False
        for n, item in enumerate(items):
            if not done and isinstance(item, Text) and re.search(r"[A-Za-z]{2,}", item.text):
                items[n] = Text(re.sub(r"[A-Za-z]{2,}", "zzyzx", item.text, count=1))
                done = True
        steps.append(Step(tuple(items)))
    return render(dataclasses.replace(ast, steps=tuple(steps)))


def mean(values):
    values = list(values)
    return sum(Fraction(v) for v in values) / len(values)


def test_perturbation_monotonicity(corpus, verdict):
    missing_means, zeroed = [], True
    for k in range(4):
        reports = [score_sample(s.reference_cook, drop_ingredients(s.reference_cook, k)) for s in corpus]
        missing_means.append(mean(len(r.missing_ingredients) for r in reports))
        if k:
            zeroed &= all(r.ingredient_score == 0 for r in reports)
    increasing = all(a < b for a, b in zip(missing_means, missing_means[1:]))

    clean = [score_sample(s.reference_cook, s.reference_cook) for s in corpus]
    noisy = [score_sample(s.reference_cook, substitute_per_step(s.reference_cook)) for s in corpus]
    wer_up = mean(r.wer for r in noisy) > mean(r.wer for r in clean)
    ter_up = mean(r.ter for r in noisy) > mean(r.ter for r in clean)
    per_sample_up = all(n.wer > c.wer and n.ter > c.ter for n, c in zip(noisy, clean))
    verdict(
        "perturbation monotonicity",
        increasing and zeroed and wer_up and ter_up and per_sample_up,
        "missing means " + ", ".join(f"{float(m):.2f}" for m in missing_means)
        + f"; substitution WER {float(mean(r.wer for r in noisy)):.4f}, TER {float(mean(r.ter for r in noisy)):.4f}",
    )


def _snapshot(run_dir):
    out = {}
    for path in sorted(run_dir.iterdir()):
        if path.name == "manifest.json":
            data = json.loads(path.read_text())
            data.pop("timestamp")
            out[path.name] = json.dumps(data, sort_keys=True).encode()
        else:
            out[path.name] = path.read_bytes()
    return out


def test_determinism(tmp_path, capsys, verdict):
    grid = str(GOLDEN / "grid.json")
    cache = tmp_path / "cache"
    assert main(["run", "--grid", grid, "--seed", "7", "--out", str(tmp_path / "rec"), "--record", str(cache)]) == 0
    dirs = []
    for name in ("a", "b"):
        assert main(["run", "--grid", grid, "--seed", "7", "--out", str(tmp_path / name), "--replay", str(cache)]) == 0
        dirs.append(Path(capsys.readouterr().out.strip().splitlines()[-1]))
    a, b = _snapshot(dirs[0]), _snapshot(dirs[1])
    same = a == b and len(a) == 6 and dirs[0].name == dirs[1].name
    verdict("determinism", same, f"{len(a)} files compared, run ids {dirs[0].name} / {dirs[1].name}")


TEN = "alpha beta gamma delta epsilon zeta eta theta iota kappa".split()


def test_bootstrap_fewshot(verdict):
    a = RecipeSample("demo-a", "recipe a", "apple", "Slice @apple{1}.")
    b = RecipeSample("demo-b", "recipe b", "butter", "Melt @butter{2%tbsp}.")
    dev = [RecipeSample("dev", "recipe dev", "", " ".join(TEN))]
    out_a = " ".join(TEN[:9] + ["wrong"])  # LCS 9 of 10 -> ROUGE-L 0.9
    out_b = " ".join(TEN[:7] + ["x", "y", "z"])  # LCS 7 of 10 -> ROUGE-L 0.7
    assert rouge_l(TEN, out_a.split()) == pytest.approx(0.9) and rouge_l(TEN, out_b.split()) == pytest.approx(0.7)

    def script(request):
        demos = [c for role, c in request.messages if role == "assistant"]
        if not demos:
            return {"recipe a": a, "recipe b": b}[request.recipe_text].reference_cook
        return out_a if demos == [a.reference_cook] else out_b

    config = EvalConfig("scripted", "method", ZeroShot())
    picks = []
    for train in ([a, b], [b, a]):
        backend = ScriptedBackend(script)
        picks.append(bootstrap_fewshot(train, dev, config, backend, trials=6, k=1, seed=0))
        tried = {tuple(c for r, c in req.messages if r == "assistant") for req in backend.requests}
        assert {(a.reference_cook,), (b.reference_cook,)} <= tried, "both demo sets must be searched"
    chose_a = all([d.sample_id for d in p.demos] == ["demo-a"] for p in picks)

    with pytest.raises(NoViableDemos):
        bootstrap_fewshot([a, b], dev, config, ScriptedBackend(lambda r: "Slice @apple{1"), trials=6, k=1)
    verdict("bootstrap few-shot", chose_a, "set A (0.9) chosen over B (0.7); malformed transcripts raise NoViableDemos")


def test_table_fidelity(tmp_path, capsys, verdict):
    assert main(["run", "--grid", str(GOLDEN / "grid.json"), "--seed", "7", "--out", str(tmp_path)]) == 0
    run_dir = Path(capsys.readouterr().out.strip().splitlines()[-1])
    produced = (run_dir / "report.md").read_text(encoding="utf-8")
    golden = (GOLDEN / "noisy_report.md").read_text(encoding="utf-8")
    rows = [line for line in produced.splitlines() if line.startswith("| noisy-echo")]
    header_ok = produced.splitlines()[0] == "| " + " | ".join(MARKDOWN_COLUMNS) + " |"
    cells_ok = all(re.fullmatch(r"\d+\.\d{4}", c.strip()) for row in rows for c in row.strip("|").split("|")[3:])
    rounding_ok = "| 0.8209 |" in render_markdown(
        [dataclasses.replace(_one_report(), mean_wer=0.82094)]
    )
    verdict(
        "table fidelity",
        produced == golden and header_ok and cells_ok and len(rows) == 6 and rounding_ok,
        f"{len(rows)} rows, golden match {produced == golden}",
    )


def _one_report():
    from cookbench.harness import ConfigReport

    r = score_sample("@salt", "@salt", "x")
    return ConfigReport.from_samples({"model": "m", "strategy": "zero-shot", "variant": "method"}, [r])
