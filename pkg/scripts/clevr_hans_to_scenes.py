"""Convert CLEVR / CLEVR-Hans ground-truth scene JSON into casearg scene lines.

Ground truth has no detector uncertainty, so every object gets confidence
1.0. The horizontal coordinate is the pixel column re-centred on the image
middle, so the default vocabulary midpoint of 0 splits left from right.

    python scripts/clevr_hans_to_scenes.py CLEVR_Hans3_train_scenes.json > train.jsonl
"""
import argparse
import json
import sys

SIZES = {"small": "sm", "large": "l"}
MATERIALS = {"metal": "m", "rubber": "ru"}
SHAPES = {"cube": "cu", "sphere": "sp", "cylinder": "cy"}
IMAGE_WIDTH = 480


def convert(scene: dict, width: int = IMAGE_WIDTH) -> dict:
    objects = []
    for o in scene["objects"]:
        objects.append({
            "size": SIZES[o["size"]],
            "color": o["color"],
            "material": MATERIALS[o["material"]],
            "shape": SHAPES[o["shape"]],
            "x": float(o["pixel_coords"][0]) - width / 2,
            "confidence": 1.0,
        })
    label = scene.get("class_id", scene.get("class"))
    return {
        "image_id": scene.get("image_filename", str(scene.get("image_index"))),
        "class_label": None if label is None else int(label),
        "objects": objects,
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("scene_json")
    p.add_argument("--width", type=int, default=IMAGE_WIDTH)
    args = p.parse_args(argv)
    with open(args.scene_json, encoding="utf-8") as fh:
        data = json.load(fh)
    for scene in data["scenes"]:
        sys.stdout.write(json.dumps(convert(scene, args.width)) + "\n")


if __name__ == "__main__":
    main()
