"""Regenerate recipe.txt files and manifest.jsonl for the bundled corpus.

Each sample directory holds a hand-written ``reference.cook``; the plain
method text is derived from it by dropping the markup.

    python scripts/build_corpus.py
"""

import json
from pathlib import Path

from cookbench.cooklang import parse, read_cook, render_plain

ROOT = Path(__file__).resolve().parents[1] / "src" / "cookbench" / "data" / "corpus"


def main():
    rows = []
    for ref in sorted(ROOT.glob("*/reference.cook")):
        sample = ref.parent
        text = render_plain(parse(read_cook(ref)))
        (sample / "recipe.txt").write_text(text + "\n", encoding="utf-8")
        rows.append(
            {
                "id": sample.name,
                "category": sample.name.split("-", 1)[0],
                "recipe": f"{sample.name}/recipe.txt",
                "reference": f"{sample.name}/reference.cook",
            }
        )
    with open(ROOT / "manifest.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {len(rows)} samples to {ROOT / 'manifest.jsonl'}")


if __name__ == "__main__":
    main()
