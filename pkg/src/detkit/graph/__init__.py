"""Toy NCHW tensor engine and the feature-enhancement forward blocks."""

from .tensor import (
    ConvParams,
    TensorNCHW,
    adaptive_avg_pool,
    bilinear_resize,
    conv2d,
    load_tensor,
    save_tensor,
)
from .blocks import (
    RfmWeights,
    TwoWayFpnWeights,
    init_rfm_weights,
    init_two_way_fpn_weights,
    rfm_forward,
    two_way_fpn_forward,
)

__all__ = [
    "TensorNCHW",
    "ConvParams",
    "conv2d",
    "bilinear_resize",
    "adaptive_avg_pool",
    "save_tensor",
    "load_tensor",
    "RfmWeights",
    "TwoWayFpnWeights",
    "init_rfm_weights",
    "init_two_way_fpn_weights",
    "rfm_forward",
    "two_way_fpn_forward",
]
