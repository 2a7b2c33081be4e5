"""Dense NCHW tensors with strided/dilated convolution, bilinear resize,
and adaptive average pooling.

Conventions are pinned for bit-reproducibility: convolution is
cross-correlation with the usual floor output formula; bilinear resize
uses half-pixel source centers with edge clamping, computed in lerp form
(v0 + w*(v1-v0)) so constant maps pass through exactly; pooling bins
follow floor(i*H/out) .. ceil((i+1)*H/out), which reduces to plain k x k
averaging when sizes divide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..rfcalc import LayerSpec


@dataclass
class TensorNCHW:
    """A 4-D float64 array (batch, channels, height, width)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 4 or min(self.data.shape) < 1:
            raise ValueError(f"need a 4-D NCHW array with positive dims, got shape {self.data.shape}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def c(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> int:
        return self.data.shape[2]

    @property
    def w(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, n, c, h, w) -> "TensorNCHW":
        return cls(np.zeros((n, c, h, w)))

    @classmethod
    def full(cls, n, c, h, w, value) -> "TensorNCHW":
        return cls(np.full((n, c, h, w), float(value)))


@dataclass
class ConvParams:
    """Layer hyper-parameters plus the weight (out, in, k, k) and bias (out,)."""

    spec: LayerSpec
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k, cin, cout = self.spec.kernel, self.spec.in_channels, self.spec.out_channels
        if self.weight.shape != (cout, cin, k, k):
            raise ValueError(f"weight shape {self.weight.shape} inconsistent with spec {(cout, cin, k, k)}")
        if self.bias.shape != (cout,):
            raise ValueError(f"bias shape {self.bias.shape} != ({cout},)")

    @property
    def weight_count(self) -> int:
        """Weight elements only (k^2 * in * out), matching the RF analyzer's
        parameter convention."""
        return int(self.weight.size)

    @classmethod
    def seeded(cls, spec: LayerSpec, seed: int) -> "ConvParams":
        """Deterministic uniform [-0.05, 0.05] weights with zero bias."""
        rng = np.random.default_rng(seed)
        k, cin, cout = spec.kernel, spec.in_channels, spec.out_channels
        return cls(spec, rng.uniform(-0.05, 0.05, (cout, cin, k, k)), np.zeros(cout))

    @classmethod
    def identity_1x1(cls, channels: int) -> "ConvParams":
        w = np.eye(channels).reshape(channels, channels, 1, 1)
        return cls(LayerSpec(1, in_channels=channels, out_channels=channels), w, np.zeros(channels))


def conv_output_size(size: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv2d(x: TensorNCHW, p: ConvParams) -> TensorNCHW:
    """Strided, dilated 2-D cross-correlation (im2col over numpy matmul)."""
    spec = p.spec
    if x.c != spec.in_channels:
        raise ValueError(f"channel mismatch: input has {x.c}, conv expects {spec.in_channels}")
    k, s, d, pad = spec.kernel, spec.stride, spec.dilation, spec.padding
    ho = conv_output_size(x.h, k, s, d, pad)
    wo = conv_output_size(x.w, k, s, d, pad)
    if ho < 1 or wo < 1:
        raise ValueError(f"conv reduces {x.h}x{x.w} below 1x1")

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, c = x.n, x.c
    cols = np.empty((n, c, k, k, ho, wo))
    for i in range(k):
        for j in range(k):
            ri, cj = i * d, j * d
            cols[:, :, i, j] = padded[:, :, ri : ri + s * ho : s, cj : cj + s * wo : s]
    cols = cols.reshape(n, c * k * k, ho * wo)
    w2d = p.weight.reshape(spec.out_channels, c * k * k)
    out = np.einsum("oc,ncp->nop", w2d, cols) + p.bias[None, :, None]
    return TensorNCHW(out.reshape(n, spec.out_channels, ho, wo))


def bilinear_resize(x: TensorNCHW, out_h: int, out_w: int) -> TensorNCHW:
    """Resize with half-pixel centers and edge clamping."""
    if out_h < 1 or out_w < 1:
        raise ValueError("target size must be positive")
    src_y = np.clip((np.arange(out_h) + 0.5) * (x.h / out_h) - 0.5, 0.0, x.h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (x.w / out_w) - 0.5, 0.0, x.w - 1.0)
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    y1 = np.minimum(y0 + 1, x.h - 1)
    x1 = np.minimum(x0 + 1, x.w - 1)
    wy = (src_y - y0)[None, None, :, None]
    wx = (src_x - x0)[None, None, None, :]

    v = x.data
    top = v[:, :, y0][:, :, :, x0]
    top = top + wx * (v[:, :, y0][:, :, :, x1] - top)
    bot = v[:, :, y1][:, :, :, x0]
    bot = bot + wx * (v[:, :, y1][:, :, :, x1] - bot)
    return TensorNCHW(top + wy * (bot - top))


def adaptive_avg_pool(x: TensorNCHW, out_h: int, out_w: int) -> TensorNCHW:
    """Average pooling to a target size; bin (i) spans
    floor(i*H/out) .. ceil((i+1)*H/out)."""
    if out_h < 1 or out_w < 1:
        raise ValueError("target size must be positive")
    if x.h % out_h == 0 and x.w % out_w == 0:
        kh, kw = x.h // out_h, x.w // out_w
        v = x.data.reshape(x.n, x.c, out_h, kh, out_w, kw)
        return TensorNCHW(v.mean(axis=(3, 5)))
    out = np.empty((x.n, x.c, out_h, out_w))
    for i in range(out_h):
        y0, y1 = (i * x.h) // out_h, -(-((i + 1) * x.h) // out_h)
        for j in range(out_w):
            x0, x1 = (j * x.w) // out_w, -(-((j + 1) * x.w) // out_w)
            out[:, :, i, j] = x.data[:, :, y0:y1, x0:x1].mean(axis=(2, 3))
    return TensorNCHW(out)


def save_tensor(t: TensorNCHW, basepath) -> None:
    """Write <base>.bin (little-endian f64, row-major) and <base>.json dims."""
    base = Path(basepath)
    base.with_suffix(".bin").write_bytes(t.data.astype("<f8").tobytes(order="C"))
    base.with_suffix(".json").write_text(
        json.dumps({"dims": list(t.shape), "dtype": "<f8", "order": "C"}) + "\n"
    )


def load_tensor(basepath) -> TensorNCHW:
    base = Path(basepath)
    meta = json.loads(base.with_suffix(".json").read_text())
    dims = tuple(meta["dims"])
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    return TensorNCHW(raw.reshape(dims).copy())
