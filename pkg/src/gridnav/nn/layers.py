"""Dense-tensor layers with explicit forward caches and analytic backprop.

Every layer follows the same protocol: ``forward(x, train)`` returns
``(y, cache)``; ``backward(dy, cache)`` returns ``(dx, grads)`` where grads
maps the layer's trainable parameter names to gradient arrays. Parameters
are plain NumPy arrays so the optimizer can update them in place.
"""

import numpy as np

from gridnav import kernels


def he_init(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d:
    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0, bias=True,
                 rng=None, dtype=np.float32):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.dtype = dtype
        rng = rng or np.random.default_rng(0)
        self.w = he_init(rng, (out_ch, in_ch, kernel, kernel),
                         in_ch * kernel * kernel, dtype)
        self.b = np.zeros(out_ch, dtype=dtype) if bias else None

    def out_size(self, size):
        return (size + 2 * self.pad - self.kernel) // self.stride + 1

    def param_items(self):
        items = [("w", self.w)]
        if self.b is not None:
            items.append(("b", self.b))
        return items

    def forward(self, x, train=False):
        n = x.shape[0]
        if x.shape[1] != self.in_ch:
            raise ValueError(f"conv expected {self.in_ch} input channels, got {x.shape[1]}")
        oh = self.out_size(x.shape[2])
        ow = self.out_size(x.shape[3])
        cols = kernels.im2col(np.ascontiguousarray(x), self.kernel, self.kernel,
                              self.stride, self.pad)
        wmat = self.w.reshape(self.out_ch, -1)
        y = np.matmul(wmat, cols)
        if self.b is not None:
            y += self.b[:, None]
        return y.reshape(n, self.out_ch, oh, ow), (x.shape, cols)

    def backward(self, dy, cache):
        x_shape, cols = cache
        n = dy.shape[0]
        dy_mat = dy.reshape(n, self.out_ch, -1)
        wmat = self.w.reshape(self.out_ch, -1)
        dw = np.matmul(dy_mat, cols.transpose(0, 2, 1)).sum(axis=0)
        grads = {"w": dw.reshape(self.w.shape)}
        if self.b is not None:
            grads["b"] = dy.sum(axis=(0, 2, 3))
        dcols = np.matmul(wmat.T, dy_mat)
        dx = kernels.col2im(np.ascontiguousarray(dcols), x_shape,
                            self.kernel, self.kernel, self.stride, self.pad)
        return dx, grads


class BatchNorm2d:
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def param_items(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state_items(self):
        return self.param_items() + [("running_mean", self.running_mean),
                                     ("running_var", self.running_var)]

    def forward(self, x, train=False):
        g = self.gamma[:, None, None]
        b = self.beta[:, None, None]
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
            return g * xhat + b, (xhat, inv_std)
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        xhat = (x - self.running_mean[:, None, None]) * inv_std[:, None, None]
        return g * xhat + b, None

    def backward(self, dy, cache):
        if cache is None:
            raise ValueError("batchnorm backward needs a train-mode cache")
        xhat, inv_std = cache
        m = dy.shape[0] * dy.shape[2] * dy.shape[3]
        dgamma = (dy * xhat).sum(axis=(0, 2, 3))
        dbeta = dy.sum(axis=(0, 2, 3))
        dxhat = dy * self.gamma[:, None, None]
        s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        dx = (inv_std[:, None, None] / m) * (m * dxhat - s1 - xhat * s2)
        return dx, {"gamma": dgamma, "beta": dbeta}


class ReLU:
    @staticmethod
    def forward(x, train=False):
        return np.maximum(x, 0), x > 0

    @staticmethod
    def backward(dy, cache):
        return dy * cache, {}


class ResidualBlock:
    """conv-bn-relu-conv-bn plus a skip path, with a 1x1 projection when the
    shapes differ; the entry conv carries the block's stride."""

    def __init__(self, in_ch, out_ch, stride=1, rng=None, dtype=np.float32):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.stride = stride
        self.conv1 = Conv2d(in_ch, out_ch, 3, stride=stride, pad=1, bias=False,
                            rng=rng, dtype=dtype)
        self.bn1 = BatchNorm2d(out_ch, dtype=dtype)
        self.conv2 = Conv2d(out_ch, out_ch, 3, stride=1, pad=1, bias=False,
                            rng=rng, dtype=dtype)
        self.bn2 = BatchNorm2d(out_ch, dtype=dtype)
        if stride != 1 or in_ch != out_ch:
            self.proj = Conv2d(in_ch, out_ch, 1, stride=stride, pad=0,
                               bias=False, rng=rng, dtype=dtype)
            self.bnp = BatchNorm2d(out_ch, dtype=dtype)
        else:
            self.proj = None
            self.bnp = None

    def submodules(self):
        mods = [("conv1", self.conv1), ("bn1", self.bn1),
                ("conv2", self.conv2), ("bn2", self.bn2)]
        if self.proj is not None:
            mods += [("proj", self.proj), ("bnp", self.bnp)]
        return mods

    def out_size(self, size):
        return self.conv1.out_size(size)

    def forward(self, x, train=False):
        y, c1 = self.conv1.forward(x, train)
        y, cb1 = self.bn1.forward(y, train)
        y, cr1 = ReLU.forward(y, train)
        y, c2 = self.conv2.forward(y, train)
        y, cb2 = self.bn2.forward(y, train)
        if self.proj is not None:
            skip, cp = self.proj.forward(x, train)
            skip, cbp = self.bnp.forward(skip, train)
        else:
            skip, cp, cbp = x, None, None
        out, cr2 = ReLU.forward(y + skip, train)
        return out, (c1, cb1, cr1, c2, cb2, cp, cbp, cr2)

    def backward(self, dy, cache):
        c1, cb1, cr1, c2, cb2, cp, cbp, cr2 = cache
        g, _ = ReLU.backward(dy, cr2)
        grads = {}

        db, gb = self.bn2.backward(g, cb2)
        grads.update({f"bn2.{k}": v for k, v in gb.items()})
        db, gc = self.conv2.backward(db, c2)
        grads.update({f"conv2.{k}": v for k, v in gc.items()})
        db, _ = ReLU.backward(db, cr1)
        db, gb = self.bn1.backward(db, cb1)
        grads.update({f"bn1.{k}": v for k, v in gb.items()})
        dx, gc = self.conv1.backward(db, c1)
        grads.update({f"conv1.{k}": v for k, v in gc.items()})

        if self.proj is not None:
            ds, gb = self.bnp.backward(g, cbp)
            grads.update({f"bnp.{k}": v for k, v in gb.items()})
            ds, gc = self.proj.backward(ds, cp)
            grads.update({f"proj.{k}": v for k, v in gc.items()})
            dx = dx + ds
        else:
            dx = dx + g
        return dx, grads

    def param_items(self):
        items = []
        for name, mod in self.submodules():
            for pname, arr in mod.param_items():
                items.append((f"{name}.{pname}", arr))
        return items

    def state_items(self):
        items = []
        for name, mod in self.submodules():
            entries = mod.state_items() if hasattr(mod, "state_items") else mod.param_items()
            for pname, arr in entries:
                items.append((f"{name}.{pname}", arr))
        return items
