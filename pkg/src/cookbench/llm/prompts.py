"""Prompt assembly for the three input variants and the prompting strategies."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import ClassVar, Union

RETURN_ONLY = (
    "Return only Cooklang formatted recipe, with no other commentary. "
    "Convert the whole recipe, through to its final step."
)

COOKLANG_SPEC = """\
Cooklang Recipe Specification:
    1. Ingredients
    - Use `@` to define ingredients
    - For multi-word ingredients, end with `{}`
    - Specify quantity in `{}` after the name
    - Use `%` to separate the amount from its unit
    ```
    @salt
    @ground black pepper{}
    @potato{2}
    @bacon strips{1%kg}
    @syrup{1/2%tbsp}
    ```
    2. Comments
    - Single-line: Use `--` at the end of a line
    - Multi-line: Enclose in `[- -]`
    ```
    -- Don't burn the roux!
    Mash @potato{2%kg} until smooth -- alternatively, boil 'em first, then mash 'em, then stick 'em in a stew.
    ```
    3. Cookware
    - Define with `#`
    - Use `{}` for multi-word items
    ```
    #pot
    #potato masher{}
    ```
    4. Timers
    - Define with `~`
    - Specify duration in `{}`, with `%` before the unit
    - Can include a name before the duration
    ```
    ~{25%minutes}
    ~eggs{3%minutes}
    ```"""


class MissingField(ValueError):
    pass


class InputVariant(str, Enum):
    METHOD = "method"
    METHOD_INGREDIENTS = "method+ingredients"
    METHOD_INGREDIENTS_SCHEMA = "method+ingredients+schema"

    @property
    def uses_ingredients(self):
        return self is not InputVariant.METHOD

    @property
    def uses_schema(self):
        return self is InputVariant.METHOD_INGREDIENTS_SCHEMA


@dataclass(frozen=True)
class Demo:
    """One worked example: the inputs and the Cooklang they should become."""

    recipe_text: str
    ingredients_text: str
    cooklang: str
    sample_id: str | None = None

    @classmethod
    def from_sample(cls, sample):
        return cls(sample.recipe_text, sample.ingredients_text, sample.reference_cook, sample.id)


@dataclass(frozen=True)
class ZeroShot:
    name: ClassVar[str] = "zero-shot"


@dataclass(frozen=True)
class FewShot:
    demos: tuple[Demo, ...]
    name: ClassVar[str] = "few-shot"

    def __post_init__(self):
        if not self.demos:
            raise ValueError("few-shot prompting needs at least one demo")


@dataclass(frozen=True)
class BootstrapFewShot:
    """Few-shot whose demos are still to be picked from a train split."""

    k: int = 4
    trials: int = 16
    name: ClassVar[str] = "few-shot"


@dataclass(frozen=True)
class ExternalTemplate:
    """Instruction and demos produced offline, e.g. by a prompt optimizer.

    The file is JSON::

        {"instruction": "...",
         "demos": [{"recipe_text": "...", "ingredients": "...", "cooklang": "..."}]}
    """

    instruction: str
    demos: tuple[Demo, ...] = ()
    path: str | None = None
    name: ClassVar[str] = "template"

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data.get("instruction"), str) or not data["instruction"].strip():
            raise ValueError(f"{path}: template needs a non-empty 'instruction'")
        demos = tuple(
            Demo(d["recipe_text"], d.get("ingredients", ""), d["cooklang"]) for d in data.get("demos", [])
        )
        return cls(data["instruction"].strip(), demos, str(path))


PromptStrategy = Union[ZeroShot, FewShot, BootstrapFewShot, ExternalTemplate]


def parse_strategy(spec: str, base_dir=None) -> PromptStrategy:
    """``"zero-shot"``, ``"few-shot"`` or ``"template:<path>"``."""
    if spec == "zero-shot":
        return ZeroShot()
    if spec == "few-shot":
        return BootstrapFewShot()
    if spec.startswith("template:"):
        path = Path(spec.split(":", 1)[1])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return ExternalTemplate.load(path)
    raise ValueError(f"unknown prompt strategy {spec!r}")


@dataclass(frozen=True)
class EvalConfig:
    """One cell of the experiment grid."""

    model_id: str
    variant: InputVariant = InputVariant.METHOD_INGREDIENTS_SCHEMA
    strategy: PromptStrategy = field(default_factory=ZeroShot)
    backend: str = "http"
    endpoint: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "variant", InputVariant(self.variant))

    @property
    def label(self):
        return f"{self.model_id} / {self.strategy.name} / {self.variant.value}"

    def descriptor(self) -> dict:
        """JSON-safe summary; credentials are referenced by variable name only."""
        out = {
            "model": self.model_id,
            "strategy": self.strategy.name,
            "variant": self.variant.value,
            "backend": self.backend,
            "endpoint": self.endpoint,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }
        if isinstance(self.strategy, BootstrapFewShot):
            out["k"], out["trials"] = self.strategy.k, self.strategy.trials
        if isinstance(self.strategy, (FewShot, ExternalTemplate)):
            out["demos"] = [d.sample_id for d in self.strategy.demos]
        if isinstance(self.strategy, ExternalTemplate):
            out["template"] = self.strategy.path
        return out

    def with_strategy(self, strategy):
        return replace(self, strategy=strategy)


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[tuple[str, str], ...]

    def as_payload(self):
        return [{"role": role, "content": content} for role, content in self.messages]


def _instruction(variant, strategy):
    if isinstance(strategy, ExternalTemplate):
        head = strategy.instruction
    elif variant.uses_ingredients:
        head = "Convert plain recipe text with the provided ingredients into Cooklang text format."
    else:
        head = "Convert plain recipe text into Cooklang text format."
    parts = [head]
    if variant.uses_schema:
        parts.append(COOKLANG_SPEC)
    if RETURN_ONLY not in head:
        parts.append(RETURN_ONLY)
    return "\n\n".join(parts)


def _fields(variant, recipe_text, ingredients_text):
    lines = []
    if variant.uses_ingredients:
        lines.append(f"ingredients: {ingredients_text}")
    lines.append(f"recipe_text: {recipe_text}")
    return "\n".join(lines)


def build_prompt(sample, config: EvalConfig) -> PromptBundle:
    """Chat messages for converting ``sample`` under ``config``.

    System instruction first, then demos as user/assistant pairs, then the
    sample itself as the final user message.
    """
    variant, strategy = config.variant, config.strategy
    if isinstance(strategy, BootstrapFewShot):
        raise ValueError("few-shot demos have not been selected yet; run bootstrap_fewshot first")
    if not sample.recipe_text.strip():
        raise MissingField(f"sample {sample.id!r} has no recipe_text")
    if variant.uses_ingredients and not sample.ingredients_text.strip():
        raise MissingField(f"sample {sample.id!r} has no ingredients_text for variant {variant.value}")

    messages = [("system", _instruction(variant, strategy))]
    for demo in getattr(strategy, "demos", ()):
        messages.append(("user", _fields(variant, demo.recipe_text, demo.ingredients_text)))
        messages.append(("assistant", demo.cooklang))
    messages.append(("user", _fields(variant, sample.recipe_text, sample.ingredients_text)))
    return PromptBundle(tuple(messages))
