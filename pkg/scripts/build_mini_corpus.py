"""Builds the bundled mini corpus: 12 synthetic indoor frames, annotations,
and the question/answer file. Regenerate after changing templates:

    python3 scripts/build_mini_corpus.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sightlink.dataset import (  # noqa: E402
    AnnotatedObject,
    Annotation,
    ObjectClass,
    dump_questions,
    generate_questions,
)
from sightlink.simulator import make_synthetic_frame  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "sightlink" / "data" / "mini_corpus"

O = ObjectClass

# ten two-or-more-object scenes and two single-object scenes -> 34 entries
SCENES: list[tuple[str, list[tuple[ObjectClass, str, bool]]]] = [
    ("img_01.jpg", [(O.DESK, "", False), (O.SEAT, "", True)]),
    ("img_02.jpg", [(O.EXIT_ENTRANCE, "exit", False)]),
    ("img_03.jpg", [(O.ELEVATOR, "", False), (O.PERSON, "", True)]),
    ("img_04.jpg", [(O.STEPS, "", False), (O.HAZARD_TRIP, "loose cable", True)]),
    ("img_05.jpg", [(O.HAZARD_PILLAR, "", False), (O.DESK, "", True)]),
    ("img_06.jpg", [(O.PERSON, "", False), (O.SEAT, "", True), (O.DESK, "", False)]),
    ("img_07.jpg", [(O.ELEVATOR, "", False), (O.EXIT_ENTRANCE, "doorway", True)]),
    ("img_08.jpg", [(O.STEPS, "", False)]),
    ("img_09.jpg", [(O.SEAT, "", False), (O.HAZARD_PILLAR, "", True)]),
    ("img_10.jpg", [(O.PERSON, "", False), (O.HAZARD_TRIP, "wet floor sign", True)]),
    ("img_11.jpg", [(O.EXIT_ENTRANCE, "doorway", False), (O.SEAT, "", True)]),
    ("img_12.jpg", [(O.ELEVATOR, "", False), (O.STEPS, "", True), (O.PERSON, "", False)]),
]

# hand-written answers keyed by (image, category key); filled after the
# seeded generator fixed which objects each question asks about
GROUND_TRUTHS: dict[tuple[str, str], str] = {
    ("img_01.jpg", "navigational_guidance"): "Walk forward about three meters and the seat is just to your left.",
    ("img_01.jpg", "distance_proximity"): "The seat is about three meters in front of you.",
    ("img_01.jpg", "spatial_relationships"): "They are at the same height; the desk stands directly beside the seat.",
    ("img_02.jpg", "navigational_guidance"): "Turn slightly right and walk straight; the exit is at the end of the corridor.",
    ("img_02.jpg", "distance_proximity"): "The exit is roughly five meters away.",
    ("img_03.jpg", "navigational_guidance"): "Move ahead past the person on your right and the elevator doors are straight on.",
    ("img_03.jpg", "distance_proximity"): "The elevator is about four meters ahead.",
    ("img_03.jpg", "spatial_relationships"): "Neither; the elevator doors and the person are on the same level, the person standing to the right.",
    ("img_04.jpg", "navigational_guidance"): "Step carefully over the loose cable and the steps begin two meters ahead.",
    ("img_04.jpg", "distance_proximity"): "The steps start about two meters in front of you.",
    ("img_04.jpg", "spatial_relationships"): "The loose cable lies below the steps, on the floor just before them.",
    ("img_05.jpg", "navigational_guidance"): "Bear left around the desk; the pillar is straight ahead in the open area.",
    ("img_05.jpg", "distance_proximity"): "The desk is about two meters to your right.",
    ("img_05.jpg", "spatial_relationships"): "Neither above nor below; the pillar rises beside the desk at floor level.",
    ("img_06.jpg", "navigational_guidance"): "The desk is ahead and slightly left, past the person standing nearby.",
    ("img_06.jpg", "distance_proximity"): "The seat is about one meter away, directly in front of you.",
    ("img_06.jpg", "spatial_relationships"): "The desk surface is above the seat, which is tucked under it.",
    ("img_07.jpg", "navigational_guidance"): "Walk straight about six meters; the elevator is beside the doorway on the left wall.",
    ("img_07.jpg", "distance_proximity"): "The doorway is around six meters ahead.",
    ("img_07.jpg", "spatial_relationships"): "Neither; the doorway and the elevator are side by side at the same level.",
    ("img_08.jpg", "navigational_guidance"): "Continue straight; the steps start right after the landing, about three meters away.",
    ("img_08.jpg", "distance_proximity"): "The steps are about three meters in front of you.",
    ("img_09.jpg", "navigational_guidance"): "The seat is two meters ahead on your right, just past the pillar.",
    ("img_09.jpg", "distance_proximity"): "The pillar is roughly one meter ahead; keep left to avoid it.",
    ("img_09.jpg", "spatial_relationships"): "The pillar rises above the seat, which sits at its base.",
    ("img_10.jpg", "navigational_guidance"): "The wet floor sign is straight ahead; walk around it on the left.",
    ("img_10.jpg", "distance_proximity"): "The wet floor sign is about two meters in front of you.",
    ("img_10.jpg", "spatial_relationships"): "The wet floor sign is below the person, standing on the floor ahead of them.",
    ("img_11.jpg", "navigational_guidance"): "Head straight through the room; the doorway is on the far wall.",
    ("img_11.jpg", "distance_proximity"): "The seat is about one meter to your left.",
    ("img_11.jpg", "spatial_relationships"): "The seat is below the doorway's frame, placed just to its right.",
    ("img_12.jpg", "navigational_guidance"): "The steps are to your right, just before the elevator bank.",
    ("img_12.jpg", "distance_proximity"): "The person is about three meters ahead, near the elevator.",
    ("img_12.jpg", "spatial_relationships"): "The steps are below the person, who is standing at the top of them.",
}


def annotations() -> list[Annotation]:
    result = []
    for image_file, objects in SCENES:
        result.append(
            Annotation(
                image_file,
                tuple(AnnotatedObject(cls, label, secondary) for cls, label, secondary in objects),
            )
        )
    return result


def main(print_only: bool = False) -> None:
    entries = []
    for index, annotation in enumerate(annotations()):
        for entry in generate_questions(annotation, rng_seed=index):
            if print_only:
                print(f"{entry.image_file}  {entry.category.value}: {entry.question}")
                continue
            entry.ground_truth = GROUND_TRUTHS[(entry.image_file, entry.category.value)]
            entries.append(entry)
    if print_only:
        return

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    images_dir = OUT_DIR / "images"
    images_dir.mkdir(exist_ok=True)
    for index, (image_file, _) in enumerate(SCENES):
        (images_dir / image_file).write_bytes(make_synthetic_frame(160, 120, index))

    (OUT_DIR / "lvsqa.json").write_text(dump_questions(entries), encoding="utf-8")
    annotation_data = {
        image_file: [
            {"class": cls.value, "label": label, "secondary": secondary}
            for cls, label, secondary in objects
        ]
        for image_file, objects in SCENES
    }
    (OUT_DIR / "annotations.json").write_text(
        json.dumps(annotation_data, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(entries)} entries to {OUT_DIR}")


if __name__ == "__main__":
    main(print_only="--print" in sys.argv)
