from __future__ import annotations

import numpy as np

from ..errors import SingleClass


def _plain(x):
    if isinstance(x, np.generic):
        return x.item()
    return x


def encode_labels(y, labels=None, allow_single=False):
    """Map ``y`` to integer codes over ``labels`` (default: sorted unique values).

    Labels given explicitly keep their order; labels absent from ``y`` are
    dropped. Raises SingleClass if fewer than two labels remain.
    """
    y = [_plain(v) for v in np.asarray(y).tolist()]
    present = set(y)
    if labels is None:
        labels = sorted(present)
    else:
        labels = [_plain(v) for v in labels]
        missing = present - set(labels)
        if missing:
            raise ValueError(f"labels {sorted(map(str, missing))} not in label list")
        labels = [lab for lab in labels if lab in present]
    if len(labels) < 2 and not allow_single:
        raise SingleClass(f"need at least two classes, got {labels}")
    index = {lab: i for i, lab in enumerate(labels)}
    return labels, np.array([index[v] for v in y], dtype=np.int64)
