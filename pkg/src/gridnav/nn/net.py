"""The two-tower detection network.

Each input (laser local-map, global-map crop) runs through its own stack of
three stride-2 residual blocks; the feature maps are concatenated channel-wise
and refined by two more residual blocks, then a 4x4 valid convolution emits
the (6, 5, 5) detection grid. Single-input model variants feed an all-unknown
image to the silent tower, so the three variants share one architecture.
"""

from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from gridnav.nn.layers import Conv2d, ResidualBlock


@dataclass(frozen=True)
class NetSpec:
    input_px: int = 244
    tower_channels: tuple = (16, 32, 64)
    trunk_channels: tuple = (64, 32)
    head_kernel: int = 4
    grid_size: int = 5
    out_channels: int = 6

    def plan(self):
        """Per-stage sizes and trunk strides; raises when the input size
        cannot reach the head's required spatial size."""
        need = self.head_kernel + self.grid_size - 1
        size = self.input_px
        tower_sizes = []
        for _ in self.tower_channels:
            size = (size - 1) // 2 + 1
            tower_sizes.append(size)
        trunk = []
        for _ in self.trunk_channels:
            stride = 2 if size > need else 1
            size = (size - 1) // stride + 1
            trunk.append((stride, size))
        if size != need:
            raise ValueError(
                f"input size {self.input_px} does not reduce to the {need}x{need} "
                f"head input (got {size}); pick a size like 244 or 124")
        return tower_sizes, trunk

    def to_dict(self):
        d = asdict(self)
        d["tower_channels"] = list(self.tower_channels)
        d["trunk_channels"] = list(self.trunk_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(input_px=int(d["input_px"]),
                   tower_channels=tuple(d["tower_channels"]),
                   trunk_channels=tuple(d["trunk_channels"]),
                   head_kernel=int(d["head_kernel"]),
                   grid_size=int(d["grid_size"]),
                   out_channels=int(d["out_channels"]))


class DetectorNet:
    def __init__(self, spec=None, seed=0, dtype=np.float32):
        self.spec = spec or NetSpec()
        self.dtype = dtype
        self.seed = seed
        _, trunk_plan = self.spec.plan()
        rng = np.random.default_rng(seed)

        def tower():
            blocks = []
            in_ch = 1
            for ch in self.spec.tower_channels:
                blocks.append(ResidualBlock(in_ch, ch, stride=2, rng=rng, dtype=dtype))
                in_ch = ch
            return blocks

        self.tower_laser = tower()
        self.tower_gmap = tower()
        in_ch = 2 * self.spec.tower_channels[-1]
        self.trunk = []
        for ch, (stride, _) in zip(self.spec.trunk_channels, trunk_plan):
            self.trunk.append(ResidualBlock(in_ch, ch, stride=stride, rng=rng, dtype=dtype))
            in_ch = ch
        self.head = Conv2d(in_ch, self.spec.out_channels, self.spec.head_kernel,
                           stride=1, pad=0, bias=True, rng=rng, dtype=dtype)

    def named_modules(self):
        mods = []
        for i, b in enumerate(self.tower_laser):
            mods.append((f"laser{i}", b))
        for i, b in enumerate(self.tower_gmap):
            mods.append((f"gmap{i}", b))
        for i, b in enumerate(self.trunk):
            mods.append((f"trunk{i}", b))
        mods.append(("head", self.head))
        return mods

    def parameters(self):
        """Trainable parameters in declaration order (running stats excluded)."""
        out = OrderedDict()
        for mname, mod in self.named_modules():
            for pname, arr in mod.param_items():
                out[f"{mname}.{pname}"] = arr
        return out

    def state_arrays(self):
        """All persistent arrays, including batchnorm running statistics."""
        out = OrderedDict()
        for mname, mod in self.named_modules():
            entries = mod.state_items() if hasattr(mod, "state_items") else mod.param_items()
            for pname, arr in entries:
                out[f"{mname}.{pname}"] = arr
        return out

    def _check_input(self, x, name):
        px = self.spec.input_px
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] != px or x.shape[3] != px:
            raise ValueError(
                f"{name} input must be (N, 1, {px}, {px}), got {x.shape}")

    def forward(self, laser, gmap, train=False):
        """Run both towers and the trunk; returns ((N, 6, S, S) logits, cache)."""
        laser = np.ascontiguousarray(laser, dtype=self.dtype)
        gmap = np.ascontiguousarray(gmap, dtype=self.dtype)
        self._check_input(laser, "laser")
        self._check_input(gmap, "gmap")
        caches = {}
        x1 = laser
        for i, b in enumerate(self.tower_laser):
            x1, caches[f"laser{i}"] = b.forward(x1, train)
        x2 = gmap
        for i, b in enumerate(self.tower_gmap):
            x2, caches[f"gmap{i}"] = b.forward(x2, train)
        x = np.concatenate([x1, x2], axis=1)
        caches["split"] = x1.shape[1]
        for i, b in enumerate(self.trunk):
            x, caches[f"trunk{i}"] = b.forward(x, train)
        out, caches["head"] = self.head.forward(x, train)
        if not np.isfinite(out).all():
            raise FloatingPointError("non-finite activation in network output")
        return out, caches

    def backward(self, dout, caches):
        """Gradients for every trainable parameter, plus the two input grads."""
        grads = {}
        d, g = self.head.backward(dout, caches["head"])
        grads.update({f"head.{k}": v for k, v in g.items()})
        for i in reversed(range(len(self.trunk))):
            d, g = self.trunk[i].backward(d, caches[f"trunk{i}"])
            grads.update({f"trunk{i}.{k}": v for k, v in g.items()})
        split = caches["split"]
        d1, d2 = d[:, :split], d[:, split:]
        for i in reversed(range(len(self.tower_laser))):
            d1, g = self.tower_laser[i].backward(d1, caches[f"laser{i}"])
            grads.update({f"laser{i}.{k}": v for k, v in g.items()})
        for i in reversed(range(len(self.tower_gmap))):
            d2, g = self.tower_gmap[i].backward(d2, caches[f"gmap{i}"])
            grads.update({f"gmap{i}.{k}": v for k, v in g.items()})
        return grads, (d1, d2)
