#!/usr/bin/env python3
"""Export one preview image per trigger family member (solid / checker /
square / circle / cross at a few sizes) for visual inspection.

Usage: python scripts/render_trigger_gallery.py [OUT_DIR]
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from txai_bench.imaging import image_to_rgb, write_ppm
from txai_bench.trojan import (
    CheckerPattern,
    ShapePattern,
    SolidPattern,
    TriggerSpec,
    materialize,
    stamp,
)

PATTERNS = {
    "solid_white": SolidPattern(color=(1.0,)),
    "solid_grey": SolidPattern(color=(0.5,)),
    "checker": CheckerPattern(),
    "square": ShapePattern(shape="square"),
    "circle": ShapePattern(shape="circle"),
    "cross": ShapePattern(shape="cross"),
}


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/trigger_gallery")
    out.mkdir(parents=True, exist_ok=True)
    dims = (1, 28, 28)
    canvas = np.full(dims, 0.25)
    for name, pattern in PATTERNS.items():
        for size in (4, 6, 8):
            trig = materialize(TriggerSpec(pattern=pattern, size=size), dims)
            write_ppm(out / f"{name}_{size}.ppm", image_to_rgb(stamp(canvas, trig)))
    print(f"wrote {len(PATTERNS) * 3} previews to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
