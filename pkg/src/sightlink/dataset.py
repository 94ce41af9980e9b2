"""LVSQA dataset schema, validation, loading and template-driven generation.

The on-disk format is a JSON object keyed by image file name; each value maps
a category key to one {"question": ..., "answer": ...} pair:

    {
      "img_001.jpg": {
        "navigational_guidance": {"question": "...", "answer": "..."},
        "distance_proximity":    {"question": "...", "answer": "..."},
        "spatial_relationships": {"question": "...", "answer": "..."}
      }
    }
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class Category(Enum):
    NAVIGATIONAL_GUIDANCE = "navigational_guidance"
    DISTANCE_PROXIMITY = "distance_proximity"
    SPATIAL_RELATIONSHIPS = "spatial_relationships"


CATEGORY_KEYS = tuple(c.value for c in Category)


class ObjectClass(Enum):
    EXIT_ENTRANCE = "exit_entrance"
    STEPS = "steps"
    ELEVATOR = "elevator"
    HAZARD_PILLAR = "hazard_pillar"
    HAZARD_TRIP = "hazard_trip"
    SEAT = "seat"
    DESK = "desk"
    PERSON = "person"


OBJECT_DISPLAY = {
    ObjectClass.EXIT_ENTRANCE: "exit",
    ObjectClass.STEPS: "steps",
    ObjectClass.ELEVATOR: "elevator",
    ObjectClass.HAZARD_PILLAR: "pillar",
    ObjectClass.HAZARD_TRIP: "trip hazard",
    ObjectClass.SEAT: "seat",
    ObjectClass.DESK: "desk",
    ObjectClass.PERSON: "person",
}

# Template registry, versioned: index 0 is the canonical form per category,
# the rest are paraphrase variants. {object}/{second} are display phrases.
TEMPLATES_VERSION = "lvsqa-templates-v1"

TEMPLATES: dict[Category, tuple[str, ...]] = {
    Category.NAVIGATIONAL_GUIDANCE: (
        "How can I reach the {object}?",
        "What is the way to the {object}?",
        "How do I get to the {object}?",
    ),
    Category.DISTANCE_PROXIMITY: (
        "How far is the {object} from me?",
        "How close am I to the {object}?",
        "What is the distance to the {object}?",
    ),
    Category.SPATIAL_RELATIONSHIPS: (
        "Is the {object} above or below the {second}?",
        "Is the {object} to the left or right of the {second}?",
        "Where is the {object} relative to the {second}?",
    ),
}


class DatasetError(Exception):
    pass


class NoObjectsError(DatasetError):
    pass


class ParseError(DatasetError):
    pass


class SchemaError(DatasetError):
    """Content violates the dataset schema; ``location`` is a /-joined path."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


@dataclass(frozen=True)
class AnnotatedObject:
    object_class: ObjectClass
    label: str = ""
    secondary: bool = False

    @property
    def display(self) -> str:
        return self.label or OBJECT_DISPLAY[self.object_class]


@dataclass(frozen=True)
class Annotation:
    image_file: str
    objects: tuple[AnnotatedObject, ...]


@dataclass
class QAEntry:
    image_file: str
    category: Category
    question: str
    ground_truth: str
    model_answer: str | None = None


@dataclass
class Violation:
    location: str
    message: str


def generate_questions(
    annotation: Annotation, rng_seed: int, use_variants: bool = False
) -> list[QAEntry]:
    """One question per applicable category, ground truths left empty.

    Object (and template, with ``use_variants``) choice is seeded-random, so
    identical (annotation, seed) inputs yield identical questions. With fewer
    than two objects the spatial-relationships entry is omitted.
    """
    if not annotation.objects:
        raise NoObjectsError(f"{annotation.image_file}: no annotated objects")
    rng = random.Random(rng_seed)
    entries = []
    for category in Category:
        templates = TEMPLATES[category]
        if category is Category.SPATIAL_RELATIONSHIPS:
            if len(annotation.objects) < 2:
                continue
            first = rng.choice(annotation.objects)
            seconds = [o for o in annotation.objects if o is not first and o.secondary]
            if not seconds:
                seconds = [o for o in annotation.objects if o is not first]
            second = rng.choice(seconds)
            template = rng.choice(templates) if use_variants else templates[0]
            question = template.format(object=first.display, second=second.display)
        else:
            chosen = rng.choice(annotation.objects)
            template = rng.choice(templates) if use_variants else templates[0]
            question = template.format(object=chosen.display)
        entries.append(QAEntry(annotation.image_file, category, question, ""))
    return entries


def _collect(path: Path) -> tuple[dict, list[Violation]]:
    violations: list[Violation] = []

    # the hook sees no key path, so a duplicate is located by the key itself;
    # without it json.loads would collapse duplicates silently
    def hook(pairs):
        seen = set()
        result = {}
        for key, value in pairs:
            if key in seen:
                violations.append(Violation(str(key), "duplicate key"))
                continue
            seen.add(key)
            result[key] = value
        return result

    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text, object_pairs_hook=hook)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        violations.append(Violation("<root>", "top level must be a JSON object"))
        return {}, violations

    for image_file, per_category in data.items():
        if not isinstance(per_category, dict):
            violations.append(Violation(image_file, "value must be an object"))
            continue
        for key, pair in per_category.items():
            location = f"{image_file}/{key}"
            if key not in CATEGORY_KEYS:
                violations.append(
                    Violation(location, f"unknown category key (expected one of {CATEGORY_KEYS})")
                )
                continue
            if not isinstance(pair, dict):
                violations.append(Violation(location, "entry must be an object"))
                continue
            for required in ("question", "answer"):
                value = pair.get(required)
                if not isinstance(value, str):
                    violations.append(Violation(f"{location}/{required}", "missing or not a string"))
            extras = set(pair) - {"question", "answer"}
            if extras:
                violations.append(Violation(location, f"unexpected keys {sorted(extras)}"))
    return data, violations


def validate_dataset(path: str | Path, allow_empty_answers: bool = False) -> list[Violation]:
    """Checks all schema invariants; returns violations, empty when valid.

    Content problems never raise, only I/O and JSON parse failures do.
    """
    path = Path(path)
    data, violations = _collect(path)
    for image_file, per_category in data.items():
        if not isinstance(per_category, dict):
            continue
        for key, pair in per_category.items():
            if key not in CATEGORY_KEYS or not isinstance(pair, dict):
                continue
            question = pair.get("question")
            answer = pair.get("answer")
            if isinstance(question, str) and not question.strip():
                violations.append(Violation(f"{image_file}/{key}/question", "empty question"))
            if (
                isinstance(answer, str)
                and not answer.strip()
                and not allow_empty_answers
            ):
                violations.append(Violation(f"{image_file}/{key}/answer", "empty answer"))
    return violations


def load_dataset(path: str | Path, allow_empty_answers: bool = False) -> list[QAEntry]:
    """Flattens the nested JSON map into QAEntry rows, validating as it goes.

    Entries come out in file order, categories in canonical order within each
    image. Raises SchemaError at the first violation; ``allow_empty_answers``
    admits generated question files awaiting human ground truths.
    """
    path = Path(path)
    data, violations = _collect(path)
    if violations:
        first = violations[0]
        raise SchemaError(first.location, first.message)
    entries: list[QAEntry] = []
    for image_file, per_category in data.items():
        for category in Category:
            pair = per_category.get(category.value)
            if pair is None:
                continue
            question = pair["question"]
            answer = pair["answer"]
            if not question.strip():
                raise SchemaError(f"{image_file}/{category.value}/question", "empty question")
            if not answer.strip() and not allow_empty_answers:
                raise SchemaError(f"{image_file}/{category.value}/answer", "empty answer")
            entries.append(QAEntry(image_file, category, question, answer))
    return entries


def dump_questions(entries: list[QAEntry]) -> str:
    """Serializes entries back to the dataset JSON shape (for generation)."""
    data: dict[str, dict[str, dict[str, str]]] = {}
    for entry in entries:
        per_image = data.setdefault(entry.image_file, {})
        per_image[entry.category.value] = {
            "question": entry.question,
            "answer": entry.ground_truth,
        }
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def mini_corpus_dir() -> Path:
    """Directory of the bundled 12-image test corpus."""
    return Path(__file__).parent / "data" / "mini_corpus"
