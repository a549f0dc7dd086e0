"""Recipe ingestion, target masking, dataset splitting, and synthetic corpora.

Recipe files are UTF-8 JSON lines; each line carries title (string), tags
(array of strings), servings (string or number), and ingredients (array of
{name, quantity, unit} string triples). Instance files are JSON lines with
fields d, u, q, target, others, title, tags, servings.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .query import QueryContext
from .units import (
    MalformedQuantity,
    MeasurementType,
    Unit,
    UnitTable,
    UnknownUnit,
    default_table,
    from_base,
    parse_quantity_text,
    to_base,
)


class SchemaError(ValueError):
    """A recipe line violates the record schema."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TooFewInstances(ValueError):
    """Dataset too small to split."""


class ConfigError(ValueError):
    """Invalid synthetic-corpus configuration."""


@dataclass(frozen=True)
class IngredientPhrase:
    descriptive_name: str
    quantity_text: str
    unit_text: str

    def __post_init__(self):
        if not self.descriptive_name:
            raise ValueError("descriptive_name must be non-empty")


@dataclass(frozen=True)
class RecipeRecord:
    title: str
    tags: tuple[str, ...]
    servings: float
    ingredients: tuple[IngredientPhrase, ...]

    def __post_init__(self):
        if len(self.ingredients) < 1:
            raise ValueError("a recipe needs at least one ingredient")
        if self.servings <= 0:
            raise ValueError("servings must be positive")


@dataclass(frozen=True)
class TaskInstance:
    mtype: MeasurementType
    unit: Unit
    quantity_base: float  # g or ml
    target_desc_name: str
    other_ingredients: tuple[str, ...]
    title: str
    tags: tuple[str, ...]
    servings: float

    def __post_init__(self):
        if self.quantity_base <= 0:
            raise ValueError("quantity_base must be positive")

    def context(self) -> QueryContext:
        return QueryContext(
            target_desc_name=self.target_desc_name,
            title=self.title,
            tags=self.tags,
            other_ingredients=self.other_ingredients,
            servings=self.servings,
        )


@dataclass
class IngestResult:
    records: list[RecipeRecord]
    errors: list[SchemaError]


def _parse_servings(value, lineno: int) -> float:
    if isinstance(value, bool):
        raise SchemaError(lineno, "servings must be a number or quantity string")
    if isinstance(value, (int, float)):
        servings = float(value)
    elif isinstance(value, str):
        try:
            servings = parse_quantity_text(value)
        except MalformedQuantity as exc:
            raise SchemaError(lineno, f"bad servings: {exc}") from None
    else:
        raise SchemaError(lineno, "servings must be a number or quantity string")
    if servings <= 0:
        raise SchemaError(lineno, "servings must be positive")
    return servings


def _parse_record(obj, lineno: int) -> RecipeRecord:
    if not isinstance(obj, dict):
        raise SchemaError(lineno, "record must be an object")
    title = obj.get("title")
    if not isinstance(title, str) or not title.strip():
        raise SchemaError(lineno, "missing or empty title")
    tags = obj.get("tags")
    if not isinstance(tags, list) or any(not isinstance(t, str) for t in tags):
        raise SchemaError(lineno, "tags must be an array of strings")
    servings = _parse_servings(obj.get("servings"), lineno)
    raw_ingredients = obj.get("ingredients")
    if not isinstance(raw_ingredients, list) or not raw_ingredients:
        raise SchemaError(lineno, "ingredients must be a non-empty array")
    phrases = []
    for i, ing in enumerate(raw_ingredients):
        if not isinstance(ing, dict):
            raise SchemaError(lineno, f"ingredient {i} must be an object")
        name = ing.get("name")
        quantity = ing.get("quantity", "")
        unit = ing.get("unit", "")
        if not isinstance(name, str) or not name.strip():
            raise SchemaError(lineno, f"ingredient {i} missing name")
        if not isinstance(quantity, str) or not isinstance(unit, str):
            raise SchemaError(lineno, f"ingredient {i} quantity/unit must be strings")
        phrases.append(IngredientPhrase(name.strip(), quantity.strip(), unit.strip()))
    return RecipeRecord(title.strip(), tuple(tags), servings, tuple(phrases))


def ingest_recipes(path: str | Path) -> IngestResult:
    """Parse a recipe JSONL file; malformed lines go to the error report."""
    result = IngestResult(records=[], errors=[])
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                result.errors.append(SchemaError(lineno, f"invalid JSON: {exc.msg}"))
                continue
            try:
                result.records.append(_parse_record(obj, lineno))
            except SchemaError as exc:
                result.errors.append(exc)
    return result


@dataclass
class BuildReport:
    built: int = 0
    discarded: int = 0
    discard_reasons: list[str] = field(default_factory=list)


def build_instances(
    records: list[RecipeRecord],
    seed: int,
    table: UnitTable | None = None,
) -> tuple[list[TaskInstance], BuildReport]:
    """Pick one target ingredient per recipe, uniformly among eligible ones.

    An ingredient is eligible when its unit normalizes to one of the 14 and
    its quantity text parses. Recipes with no eligible ingredient are
    discarded and counted, never raised.
    """
    table = table or default_table()
    rng = random.Random(seed)
    instances: list[TaskInstance] = []
    report = BuildReport()
    for idx, record in enumerate(records):
        eligible = []
        for phrase in record.ingredients:
            try:
                unit = table.normalize_unit_token(phrase.unit_text)
                value = parse_quantity_text(phrase.quantity_text)
            except (UnknownUnit, MalformedQuantity):
                continue
            eligible.append((phrase, unit, value))
        if not eligible:
            report.discarded += 1
            report.discard_reasons.append(f"recipe {idx} ({record.title}): no eligible ingredient")
            continue
        phrase, unit, value = eligible[rng.randrange(len(eligible))]
        others = tuple(p.descriptive_name for p in record.ingredients if p is not phrase)
        instances.append(
            TaskInstance(
                mtype=unit.mtype,
                unit=unit,
                quantity_base=to_base(value, unit),
                target_desc_name=phrase.descriptive_name,
                other_ingredients=others,
                title=record.title,
                tags=record.tags,
                servings=record.servings,
            )
        )
        report.built += 1
    return instances, report


def split_dataset(
    instances: list[TaskInstance], seed: int
) -> tuple[list[TaskInstance], list[TaskInstance], list[TaskInstance]]:
    """Deterministic 8:1:1 split: floor(0.8n) / floor(0.1n) / remainder."""
    n = len(instances)
    if n < 10:
        raise TooFewInstances(f"need at least 10 instances, got {n}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_train = math.floor(0.8 * n)
    n_valid = math.floor(0.1 * n)
    shuffled = [instances[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_valid],
        shuffled[n_train + n_valid :],
    )


# --- instance file round trip ---------------------------------------------


def write_instances(path: str | Path, instances: list[TaskInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(
                json.dumps(
                    {
                        "d": inst.mtype.value,
                        "u": inst.unit.canonical_name,
                        "q": inst.quantity_base,
                        "target": inst.target_desc_name,
                        "others": list(inst.other_ingredients),
                        "title": inst.title,
                        "tags": list(inst.tags),
                        "servings": inst.servings,
                    }
                )
                + "\n"
            )


def read_instances(path: str | Path, table: UnitTable | None = None) -> list[TaskInstance]:
    table = table or default_table()
    instances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                unit = table.unit(obj["u"])
                instances.append(
                    TaskInstance(
                        mtype=MeasurementType(obj["d"]),
                        unit=unit,
                        quantity_base=float(obj["q"]),
                        target_desc_name=obj["target"],
                        other_ingredients=tuple(obj["others"]),
                        title=obj["title"],
                        tags=tuple(obj["tags"]),
                        servings=float(obj["servings"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(lineno, f"bad instance line: {exc}") from exc
    return instances


# --- synthetic corpus -------------------------------------------------------


@dataclass(frozen=True)
class FixedLaw:
    value: float  # base units (g or ml)

    def validate(self):
        if self.value <= 0:
            raise ConfigError(f"fixed quantity must be positive: {self.value}")

    def sample(self, rng: random.Random) -> float:
        return self.value


@dataclass(frozen=True)
class LogUniformLaw:
    lo: float
    hi: float

    def validate(self):
        if self.lo <= 0 or self.hi < self.lo:
            raise ConfigError(f"need 0 < lo <= hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng: random.Random) -> float:
        return math.exp(rng.uniform(math.log(self.lo), math.log(self.hi)))


@dataclass(frozen=True)
class Archetype:
    """One ingredient token with its designated unit and quantity law.

    Several archetypes may share a name with different laws and weights,
    which yields a multimodal quantity distribution for that token.
    """

    name: str
    unit: str
    law: FixedLaw | LogUniformLaw
    weight: float = 1.0


_TITLE_POOL = (
    "Weeknight Skillet", "Sunday Braise", "Harvest Bowl", "Market Salad",
    "Family Casserole", "Quick Stir Fry", "Campfire Stew", "Garden Soup",
)
_TAG_POOL = (
    "main-dish", "side-dish", "vegetarian", "comfort-food", "quick",
    "slow-cooked", "spicy", "holiday",
)


@dataclass
class SynthConfig:
    archetypes: list[Archetype]
    n_recipes: int
    min_context: int = 2
    max_context: int = 4
    titles: tuple[str, ...] = _TITLE_POOL
    tag_pool: tuple[str, ...] = _TAG_POOL
    servings_choices: tuple[float, ...] = (2, 4, 6, 8)

    def validate(self, table: UnitTable) -> None:
        if not self.archetypes:
            raise ConfigError("no archetypes configured")
        if self.n_recipes <= 0:
            raise ConfigError("n_recipes must be positive")
        if not (0 <= self.min_context <= self.max_context):
            raise ConfigError("need 0 <= min_context <= max_context")
        if not self.titles or not self.tag_pool or not self.servings_choices:
            raise ConfigError("title/tag/servings pools must be non-empty")
        for arch in self.archetypes:
            if not arch.name:
                raise ConfigError("archetype name must be non-empty")
            if arch.weight <= 0:
                raise ConfigError(f"archetype {arch.name}: weight must be positive")
            try:
                table.unit(arch.unit)
            except UnknownUnit:
                raise ConfigError(f"archetype {arch.name}: unknown unit {arch.unit!r}") from None
            arch.law.validate()


@dataclass(frozen=True)
class TruthEntry:
    mtype: MeasurementType
    unit: str
    quantity_base: float


def _format_display_quantity(value: float) -> str:
    text = f"{value:.12f}".rstrip("0").rstrip(".")
    return text or "0"


def generate_synthetic_corpus(
    config: SynthConfig, seed: int, table: UnitTable | None = None
) -> tuple[list[RecipeRecord], dict[tuple[int, str], TruthEntry]]:
    """Generate recipes whose ingredient quantities follow the archetype laws.

    Returns the records plus a ground-truth map keyed by
    (recipe index, descriptive name), covering every generated ingredient.
    """
    table = table or default_table()
    config.validate(table)
    rng = random.Random(seed)
    weights = [a.weight for a in config.archetypes]
    records: list[RecipeRecord] = []
    truth: dict[tuple[int, str], TruthEntry] = {}

    def sample_phrase(arch: Archetype) -> tuple[IngredientPhrase, TruthEntry]:
        unit = table.unit(arch.unit)
        q_base = arch.law.sample(rng)
        display = from_base(q_base, unit)
        phrase = IngredientPhrase(arch.name, _format_display_quantity(display), unit.canonical_name)
        return phrase, TruthEntry(unit.mtype, unit.canonical_name, q_base)

    for idx in range(config.n_recipes):
        target = rng.choices(config.archetypes, weights=weights, k=1)[0]
        used_names = {target.name}
        context: list[Archetype] = []
        n_context = rng.randint(config.min_context, config.max_context)
        # bounded retry keeps names unique within a recipe
        for _ in range(20 * (n_context + 1)):
            if len(context) == n_context:
                break
            pick = rng.choices(config.archetypes, weights=weights, k=1)[0]
            if pick.name not in used_names:
                used_names.add(pick.name)
                context.append(pick)
        phrases = []
        for arch in [target, *context]:
            phrase, entry = sample_phrase(arch)
            phrases.append(phrase)
            truth[(idx, phrase.descriptive_name)] = entry
        records.append(
            RecipeRecord(
                title=rng.choice(config.titles),
                tags=tuple(rng.sample(config.tag_pool, k=rng.randint(1, 3))),
                servings=rng.choice(config.servings_choices),
                ingredients=tuple(phrases),
            )
        )
    return records, truth


def write_recipes(path: str | Path, records: list[RecipeRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "title": rec.title,
                        "tags": list(rec.tags),
                        "servings": rec.servings,
                        "ingredients": [
                            {"name": p.descriptive_name, "quantity": p.quantity_text, "unit": p.unit_text}
                            for p in rec.ingredients
                        ],
                    }
                )
                + "\n"
            )


# --- ready-made configurations ---------------------------------------------


def demo_config(n_recipes: int = 200) -> SynthConfig:
    """Small varied corpus exercising both types and several units."""
    archetypes = [
        Archetype("ground beef", "lb", LogUniformLaw(300, 900)),
        Archetype("chicken breast", "ounce", LogUniformLaw(150, 500)),
        Archetype("butter", "tablespoon", LogUniformLaw(15, 90)),
        Archetype("flour", "cup", LogUniformLaw(120, 700)),
        Archetype("milk", "cup", LogUniformLaw(120, 500)),
        Archetype("water", "cup", LogUniformLaw(200, 2400)),
        Archetype("salt", "teaspoon", LogUniformLaw(2, 15)),
        Archetype("black pepper", "teaspoon", LogUniformLaw(1, 6)),
        Archetype("sugar", "g", LogUniformLaw(10, 200)),
        Archetype("saffron", "pinch", LogUniformLaw(0.3, 1.3)),
        Archetype("stock", "quart", LogUniformLaw(900, 3800)),
        Archetype("parmesan", "kg", FixedLaw(250)),
    ]
    return SynthConfig(archetypes=archetypes, n_recipes=n_recipes)


def token_scaled_config(n_recipes: int = 5000) -> SynthConfig:
    """Quantities keyed to ingredient tokens, spanning five decades.

    Six tokens sit cleanly inside one decade each; two "barbell" tokens are
    multimodal across three decades with an off-center majority, which is
    where an exponent-aware regressor separates from median-style baselines.
    """
    # clean tokens carry 60% of the mass, barbell tokens 20% each
    clean = [
        Archetype("saffron threads", "g", LogUniformLaw(0.13, 0.78), weight=0.10),
        Archetype("vanilla extract", "teaspoon", LogUniformLaw(1.3, 7.8), weight=0.10),
        Archetype("olive oil", "tablespoon", LogUniformLaw(13, 78), weight=0.10),
        Archetype("rice", "g", LogUniformLaw(130, 780), weight=0.10),
        Archetype("water", "cup", LogUniformLaw(1300, 7800), weight=0.10),
        Archetype("stock", "gallon", LogUniformLaw(13000, 29000), weight=0.10),
    ]
    barbell = [
        Archetype("tomatoes", "g", LogUniformLaw(1.3, 7.8), weight=0.092),
        Archetype("tomatoes", "g", LogUniformLaw(13, 78), weight=0.020),
        Archetype("tomatoes", "g", LogUniformLaw(130, 780), weight=0.088),
        Archetype("beans", "ml", LogUniformLaw(13, 78), weight=0.092),
        Archetype("beans", "ml", LogUniformLaw(130, 780), weight=0.020),
        Archetype("beans", "ml", LogUniformLaw(1300, 7800), weight=0.088),
    ]
    return SynthConfig(archetypes=clean + barbell, n_recipes=n_recipes)


def tiny_overfit_config(n_recipes: int = 32) -> SynthConfig:
    """Fixed per-token quantities; small enough to memorize exactly."""
    archetypes = [
        Archetype("cumin", "teaspoon", FixedLaw(4.92892)),
        Archetype("onion", "g", FixedLaw(180)),
        Archetype("soy sauce", "tablespoon", FixedLaw(29.5736)),
        Archetype("beef chuck", "lb", FixedLaw(680.388)),
        Archetype("broth", "quart", FixedLaw(1892.71)),
        Archetype("chili flakes", "pinch", FixedLaw(0.616)),
        Archetype("powdered sugar", "ounce", FixedLaw(56.699)),
        Archetype("lemon juice", "ml", FixedLaw(45)),
    ]
    return SynthConfig(archetypes=archetypes, n_recipes=n_recipes, min_context=2, max_context=3)
