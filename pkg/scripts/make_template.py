"""Regenerate src/fexkit/data/neutral_template.csv.

The neutral face is drawn procedurally in the iBUG 68-point layout (jaw arc,
arched brows, straight nose bridge, almond eyes, two lip loops), then centred on
its centroid. The outer eye corners sit 100 px apart by construction.
"""

import math
from pathlib import Path

import numpy as np


def build():
    pts = []
    for i in range(17):  # jaw 0-16
        phi = math.pi * i / 16
        pts.append((-72 * math.cos(phi), -20 + 115 * math.sin(phi)))
    for i in range(5):  # brow 17-21
        t = i / 4
        pts.append((-70 + 55 * t, -45 - 8 * math.sin(math.pi * t)))
    for i in range(5):  # brow 22-26
        t = i / 4
        pts.append((15 + 55 * t, -45 - 8 * math.sin(math.pi * t)))
    pts += [(0, -30), (0, -18.3333), (0, -6.6667), (0, 5)]  # nose bridge 27-30
    pts += [(-16, 12), (-8, 14), (0, 16), (8, 14), (16, 12)]  # nostrils 31-35
    pts += [(-50, -20), (-40, -26), (-28, -26), (-18, -20), (-28, -15), (-40, -15)]  # eye 36-41
    pts += [(18, -20), (28, -26), (40, -26), (50, -20), (40, -15), (28, -15)]  # eye 42-47
    pts += [(-28, 45), (-18, 38), (-7, 35), (0, 36), (7, 35), (18, 38),
            (28, 45), (18, 53), (7, 56), (0, 57), (-7, 56), (-18, 53)]  # outer lip 48-59
    pts += [(-22, 45), (-8, 41), (0, 41), (8, 41), (22, 45), (8, 49), (0, 50), (-8, 49)]  # inner lip 60-67
    p = np.array(pts, dtype=np.float64)
    p = np.round(p, 4)
    p -= p.mean(axis=0)
    return p


if __name__ == "__main__":
    p = build()
    assert p.shape == (68, 2)
    out = Path(__file__).resolve().parents[1] / "src" / "fexkit" / "data" / "neutral_template.csv"
    out.write_text("".join(f"{x!r},{y!r}\n" for x, y in p.tolist()), encoding="utf-8")
    print(out, np.hypot(*(p[45] - p[36])), p.mean(axis=0))
