"""Adadelta: adaptive per-parameter steps from running gradient statistics."""

import numpy as np


class Adadelta:
    """Keeps E[g^2] and E[dx^2] accumulators per parameter.

    Update per step:
        E[g^2]  <- rho * E[g^2] + (1 - rho) * g^2
        dx      = -sqrt((E[dx^2] + eps) / (E[g^2] + eps)) * g
        E[dx^2] <- rho * E[dx^2] + (1 - rho) * dx^2
        x       <- x + dx   (in place)
    """

    def __init__(self, params, rho=0.95, eps=1e-6):
        if not 0 < rho < 1:
            raise ValueError(f"rho must be in (0, 1), got {rho}")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.params = dict(params)
        self.rho = rho
        self.eps = eps
        self.eg2 = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.edx2 = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, grads):
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            if g.shape != p.shape:
                raise ValueError(
                    f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
            eg2 = self.eg2[name]
            edx2 = self.edx2[name]
            eg2 *= self.rho
            eg2 += (1.0 - self.rho) * g * g
            dx = -np.sqrt((edx2 + self.eps) / (eg2 + self.eps)) * g
            edx2 *= self.rho
            edx2 += (1.0 - self.rho) * dx * dx
            p += dx
