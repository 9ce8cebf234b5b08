"""Layer primitives: dense, 2-d convolution, ReLU, max pooling, flatten.

Layers are immutable once constructed and hold plain numpy arrays. Every
layer exposes pure ``forward``/``backward`` functions operating on batches
(leading axis is the batch). Convolutions are evaluated by explicit window
enumeration (im2col) and can also be materialized as the equivalent dense
map over flattened inputs via :meth:`Conv2D.unfolded`; the attribution
engine reuses that map so dense and convolutional layers share a single
propagation code path.

Weight convention for :class:`Dense`: ``weights[j, k]`` is the edge from
unit ``j`` of the previous layer to unit ``k`` of this layer, so the
forward map is ``x @ weights + bias``.
"""

import numpy as np

from .errors import ShapeMismatchError
from .util import as_float_array, check_finite, readonly


class Dense:
    kind = "Dense"

    def __init__(self, weights, bias):
        weights = as_float_array(weights)
        bias = as_float_array(bias)
        if weights.ndim != 2:
            raise ShapeMismatchError(f"Dense weights must be 2-d, got shape {weights.shape}")
        if bias.shape != (weights.shape[1],):
            raise ShapeMismatchError(
                f"Dense bias shape {bias.shape} does not match {weights.shape[1]} outputs"
            )
        check_finite("Dense weights", weights)
        check_finite("Dense bias", bias)
        self.weights = readonly(weights)
        self.bias = readonly(bias)

    @property
    def in_features(self) -> int:
        return self.weights.shape[0]

    @property
    def out_features(self) -> int:
        return self.weights.shape[1]

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.in_features,):
            raise ShapeMismatchError(
                f"Dense expects input shape ({self.in_features},), got {tuple(in_shape)}"
            )
        return (self.out_features,)

    def forward(self, x):
        return x @ self.weights + self.bias

    def backward(self, x, dy):
        dx = dy @ self.weights.T
        grads = {"weights": x.T @ dy, "bias": dy.sum(axis=0)}
        return dx, grads

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}

    def replace(self, weights, bias):
        return Dense(weights, bias)


class Conv2D:
    """2-d convolution with zero padding over inputs shaped (channels, H, W)."""

    kind = "Conv2D"

    def __init__(self, kernel, bias, stride=(1, 1), padding=(0, 0)):
        kernel = as_float_array(kernel)
        bias = as_float_array(bias)
        if kernel.ndim != 4:
            raise ShapeMismatchError(
                f"Conv2D kernel must be (out, in, kh, kw), got shape {kernel.shape}"
            )
        if bias.shape != (kernel.shape[0],):
            raise ShapeMismatchError(
                f"Conv2D bias shape {bias.shape} does not match {kernel.shape[0]} output channels"
            )
        stride = (int(stride[0]), int(stride[1]))
        padding = (int(padding[0]), int(padding[1]))
        if stride[0] < 1 or stride[1] < 1:
            raise ShapeMismatchError(f"Conv2D stride must be >= 1, got {stride}")
        if padding[0] < 0 or padding[1] < 0:
            raise ShapeMismatchError(f"Conv2D padding must be >= 0, got {padding}")
        check_finite("Conv2D kernel", kernel)
        check_finite("Conv2D bias", bias)
        self.kernel = readonly(kernel)
        self.bias = readonly(bias)
        self.stride = stride
        self.padding = padding
        self._unfold_cache = {}

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ShapeMismatchError(
                f"Conv2D expects input (in={self.in_channels}, H, W), got {tuple(in_shape)}"
            )
        _, h, w = in_shape
        kh, kw = self.kernel.shape[2], self.kernel.shape[3]
        sh, sw = self.stride
        ph, pw = self.padding
        oh = (h + 2 * ph - kh) // sh + 1
        ow = (w + 2 * pw - kw) // sw + 1
        if oh < 1 or ow < 1 or h + 2 * ph < kh or w + 2 * pw < kw:
            raise ShapeMismatchError(
                f"Conv2D kernel {kh}x{kw} does not fit input {tuple(in_shape)} "
                f"with padding {self.padding}"
            )
        return (self.out_channels, oh, ow)

    def _im2col(self, x):
        """Gather all kernel windows of a batch into (N, in*kh*kw, oh*ow)."""
        n, c, h, w = x.shape
        _, oh, ow = self.out_shape((c, h, w))
        kh, kw = self.kernel.shape[2], self.kernel.shape[3]
        sh, sw = self.stride
        ph, pw = self.padding
        if ph or pw:
            x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        cols = np.empty((n, c, kh, kw, oh, ow), dtype=np.float64)
        for ky in range(kh):
            for kx in range(kw):
                cols[:, :, ky, kx] = x[:, :, ky : ky + oh * sh : sh, kx : kx + ow * sw : sw]
        return cols.reshape(n, c * kh * kw, oh * ow)

    def forward(self, x):
        n = x.shape[0]
        _, oh, ow = self.out_shape(x.shape[1:])
        kmat = self.kernel.reshape(self.out_channels, -1)
        out = np.matmul(kmat, self._im2col(x))
        return out.reshape(n, self.out_channels, oh, ow) + self.bias[None, :, None, None]

    def backward(self, x, dy):
        n, c, h, w = x.shape
        _, oh, ow = self.out_shape((c, h, w))
        kh, kw = self.kernel.shape[2], self.kernel.shape[3]
        sh, sw = self.stride
        ph, pw = self.padding
        kmat = self.kernel.reshape(self.out_channels, -1)
        cols = self._im2col(x)
        dy_mat = dy.reshape(n, self.out_channels, oh * ow)
        dkernel = np.einsum("nol,nkl->ok", dy_mat, cols).reshape(self.kernel.shape)
        dbias = dy.sum(axis=(0, 2, 3))
        dcols = np.matmul(kmat.T, dy_mat).reshape(n, c, kh, kw, oh, ow)
        dxp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=np.float64)
        for ky in range(kh):
            for kx in range(kw):
                dxp[:, :, ky : ky + oh * sh : sh, kx : kx + ow * sw : sw] += dcols[:, :, ky, kx]
        dx = dxp[:, :, ph : ph + h, pw : pw + w]
        return dx, {"kernel": dkernel, "bias": dbias}

    def unfolded(self, in_shape):
        """Dense map U with U[j, k] = weight of flat input j on flat output k.

        ``flatten(out) = U.T @ flatten(in) + bias_per_output`` reproduces the
        convolution (zero padding contributes nothing). Built once per input
        shape and cached; intended for attribution, not batched inference.
        """
        key = tuple(in_shape)
        cached = self._unfold_cache.get(key)
        if cached is not None:
            return cached
        c, h, w = key
        out_c, oh, ow = self.out_shape(key)
        kh, kw = self.kernel.shape[2], self.kernel.shape[3]
        sh, sw = self.stride
        ph, pw = self.padding
        u = np.zeros((c * h * w, out_c * oh * ow), dtype=np.float64)
        oy = np.arange(oh)
        ox = np.arange(ow)
        for co in range(out_c):
            for ci in range(c):
                for ky in range(kh):
                    ys = oy * sh - ph + ky
                    yok = (ys >= 0) & (ys < h)
                    for kx in range(kw):
                        wgt = self.kernel[co, ci, ky, kx]
                        if wgt == 0.0:
                            continue
                        xs = ox * sw - pw + kx
                        xok = (xs >= 0) & (xs < w)
                        rows = (ci * h + ys[yok])[:, None] * w + xs[xok][None, :]
                        cols = (co * oh + oy[yok])[:, None] * ow + ox[xok][None, :]
                        u[rows.ravel(), cols.ravel()] += wgt
        u.setflags(write=False)
        self._unfold_cache[key] = u
        return u

    def bias_per_output(self, in_shape):
        """Bias of each flattened output of :meth:`unfolded`."""
        out_c, oh, ow = self.out_shape(in_shape)
        return np.repeat(self.bias, oh * ow)

    def parameters(self):
        return {"kernel": self.kernel, "bias": self.bias}

    def replace(self, kernel, bias):
        return Conv2D(kernel, bias, self.stride, self.padding)


class ReLU:
    kind = "ReLU"

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x):
        return np.maximum(x, 0.0)

    def backward(self, x, dy):
        return dy * (x > 0.0), {}

    def parameters(self):
        return {}


class MaxPool2D:
    kind = "MaxPool2D"

    def __init__(self, window, stride=None):
        self.window = (int(window[0]), int(window[1]))
        self.stride = self.window if stride is None else (int(stride[0]), int(stride[1]))
        if min(self.window) < 1 or min(self.stride) < 1:
            raise ShapeMismatchError(
                f"MaxPool2D window/stride must be >= 1, got {self.window}/{self.stride}"
            )

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatchError(f"MaxPool2D expects input (C, H, W), got {tuple(in_shape)}")
        _, h, w = in_shape
        wh, ww = self.window
        sh, sw = self.stride
        if h < wh or w < ww:
            raise ShapeMismatchError(
                f"MaxPool2D window {self.window} does not fit input {tuple(in_shape)}"
            )
        return (in_shape[0], (h - wh) // sh + 1, (w - ww) // sw + 1)

    def _windows(self, in_shape):
        _, oh, ow = self.out_shape(in_shape)
        sh, sw = self.stride
        for oy in range(oh):
            for ox in range(ow):
                yield oy, ox, oy * sh, ox * sw

    def forward(self, x):
        n, c, h, w = x.shape
        _, oh, ow = self.out_shape((c, h, w))
        wh, ww = self.window
        out = np.empty((n, c, oh, ow), dtype=np.float64)
        for oy, ox, y0, x0 in self._windows((c, h, w)):
            out[:, :, oy, ox] = x[:, :, y0 : y0 + wh, x0 : x0 + ww].max(axis=(2, 3))
        return out

    def backward(self, x, dy):
        # gradient flows to the first maximum of each window
        n, c, h, w = x.shape
        wh, ww = self.window
        dx = np.zeros_like(x)
        for oy, ox, y0, x0 in self._windows((c, h, w)):
            win = x[:, :, y0 : y0 + wh, x0 : x0 + ww].reshape(n, c, wh * ww)
            flat_arg = win.argmax(axis=2)
            iy, ix = np.divmod(flat_arg, ww)
            nn, cc = np.meshgrid(np.arange(n), np.arange(c), indexing="ij")
            dx[nn, cc, y0 + iy, x0 + ix] += dy[:, :, oy, ox]
        return dx, {}

    def parameters(self):
        return {}


class Flatten:
    kind = "Flatten"

    def out_shape(self, in_shape):
        size = 1
        for d in in_shape:
            size *= d
        return (size,)

    def forward(self, x):
        return x.reshape(x.shape[0], -1)

    def backward(self, x, dy):
        return dy.reshape(x.shape), {}

    def parameters(self):
        return {}


PARAMETERIZED_KINDS = ("Dense", "Conv2D")


def is_parameterized(layer) -> bool:
    return layer.kind in PARAMETERIZED_KINDS
