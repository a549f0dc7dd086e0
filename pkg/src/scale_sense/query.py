"""Composition of the per-task input strings fed to the context encoder.

Each query holds exactly one [MASK] standing in for the masked numeric
fields of the target ingredient. Recipe attributes follow in a fixed
order (title, tags, other ingredients, servings); multi-element lists are
joined with [SEP2] to keep sub-structure distinguishable from top-level
[SEP] boundaries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

CLS = "[CLS]"
SEP = "[SEP]"
SEP2 = "[SEP2]"
MASK = "[MASK]"
SPECIAL_TOKENS = (CLS, SEP, SEP2, MASK)

MTYPE_WORDS = ("volume", "weight")


class Task(str, Enum):
    TYPE = "type"
    UNIT = "unit"
    QUANTITY = "quantity"


@dataclass(frozen=True)
class AblationFlags:
    use_title: bool = True
    use_tags: bool = True
    use_other_ingredients: bool = True
    use_servings: bool = True
    use_descriptive_name: bool = True  # False strips descriptor words from the target name

    @classmethod
    def none(cls) -> "AblationFlags":
        """Target-name-only composition (all recipe attributes off)."""
        return cls(False, False, False, False, True)


@dataclass(frozen=True)
class QueryContext:
    """The recipe fields a query is composed from (labels not included)."""

    target_desc_name: str
    title: str = ""
    tags: tuple[str, ...] = ()
    other_ingredients: tuple[str, ...] = ()
    servings: float | None = None


@dataclass(frozen=True)
class QueryString:
    text: str
    task: Task
    ablation: AblationFlags


def _load_descriptor_words() -> frozenset[str]:
    text = (resources.files("scale_sense.data") / "descriptor_words.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


DESCRIPTOR_WORDS = _load_descriptor_words()

# longest token first so stripping [SEP] cannot leave "2" behind from [SEP2]
_SPECIALS_RE = re.compile("|".join(re.escape(t) for t in (SEP2, CLS, SEP, MASK)))


def sanitize_field(text: str) -> str:
    """Remove literal special tokens from recipe text and collapse whitespace."""
    return " ".join(_SPECIALS_RE.sub(" ", text).split())


def plain_name(descriptive_name: str, descriptors: frozenset[str] = DESCRIPTOR_WORDS) -> str:
    """Strip descriptor words from an ingredient name.

    Comma-separated clauses made only of descriptors are dropped, then
    leading/trailing descriptor words are peeled off. Falls back to the
    original name when everything would be stripped.
    """
    segments = []
    for segment in descriptive_name.split(","):
        words = segment.split()
        if words and not all(w.lower() in descriptors for w in words):
            segments.append(words)
    words = [w for seg in segments for w in seg]
    while words and words[0].lower() in descriptors:
        words.pop(0)
    while words and words[-1].lower() in descriptors:
        words.pop()
    return " ".join(words) if words else sanitize_field(descriptive_name)


def format_servings(servings: float) -> str:
    return f"{servings:g}"


def _target_text(context: QueryContext, ablation: AblationFlags) -> str:
    name = sanitize_field(context.target_desc_name)
    if not ablation.use_descriptive_name:
        name = plain_name(name)
    return name


def _attribute_parts(context: QueryContext, ablation: AblationFlags) -> list[str]:
    parts: list[str] = []
    if ablation.use_title:
        title = sanitize_field(context.title)
        if title:
            parts += [SEP, title]
    if ablation.use_tags:
        tags = [sanitize_field(t) for t in context.tags if sanitize_field(t)]
        if tags:
            parts += [SEP, f" {SEP2} ".join(tags)]
    if ablation.use_other_ingredients:
        others = [sanitize_field(o) for o in context.other_ingredients if sanitize_field(o)]
        if others:
            parts += [SEP, f" {SEP2} ".join(others)]
    if ablation.use_servings and context.servings is not None:
        parts += [SEP, format_servings(context.servings)]
    return parts


def compose_type_query(context: QueryContext, ablation: AblationFlags = AblationFlags()) -> QueryString:
    parts = [CLS, _target_text(context, ablation), SEP, MASK]
    parts += _attribute_parts(context, ablation)
    return QueryString(" ".join(parts), Task.TYPE, ablation)


def compose_unit_query(
    context: QueryContext, mtype_word: str, ablation: AblationFlags = AblationFlags()
) -> QueryString:
    if mtype_word not in MTYPE_WORDS:
        raise ValueError(f"mtype_word must be one of {MTYPE_WORDS}, got {mtype_word!r}")
    parts = [CLS, _target_text(context, ablation), SEP, MASK, SEP, mtype_word]
    parts += _attribute_parts(context, ablation)
    return QueryString(" ".join(parts), Task.UNIT, ablation)


def compose_quantity_query(
    context: QueryContext, mtype_word: str, ablation: AblationFlags = AblationFlags()
) -> QueryString:
    # same composition as the unit query; the heads differ downstream
    q = compose_unit_query(context, mtype_word, ablation)
    return QueryString(q.text, Task.QUANTITY, ablation)


def compose_for_task(
    task: Task,
    context: QueryContext,
    mtype_word: str | None = None,
    ablation: AblationFlags = AblationFlags(),
) -> QueryString:
    if task is Task.TYPE:
        return compose_type_query(context, ablation)
    if mtype_word is None:
        raise ValueError(f"{task.value} query needs a measurement-type word")
    if task is Task.UNIT:
        return compose_unit_query(context, mtype_word, ablation)
    return compose_quantity_query(context, mtype_word, ablation)
