"""p2c: compile UI design prototypes into responsive HTML+CSS.

The pipeline lints a prototype's layer tree (containment rebuild,
fragment merging, perceptual grouping), constructs a flexbox-oriented
layout tree, assigns element-type labels, and emits deterministic
HTML/CSS, which can be verified without a browser through a replay
interpreter and compared against reference renders with SSIM/PSNR/MSE.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AnnotationSet,
    GroupType,
    Layer,
    LayerKind,
    PrototypeDoc,
    Rect,
    StyleProps,
    parse_annotations,
    parse_prototype,
    rect_contains,
    rect_iou,
    serialize_prototype,
)
