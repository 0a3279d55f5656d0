"""Adam optimizer over named parameter groups with full state reset."""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


class Adam:
    """First-order moment-tracking optimizer.

    Each named group has its own learning rate, moment buffers and step
    counter. Buffers are allocated lazily on the first step for a group.
    Masking a subset of a parameter is the caller's job: zero those gradient
    entries before calling step (moments still update with the zero).
    """

    def __init__(
        self,
        learning_rates: dict[str, float],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rates = dict(learning_rates)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t: dict[str, int] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        """Update params in place from grads; returns the params dict.

        Only the groups present in `grads` are stepped. Shapes must match the
        parameter and any previously seen state for that group.
        """
        for name, g in grads.items():
            if name not in self.learning_rates:
                raise KeyError(f"no learning rate configured for group '{name}'")
            p = params[name]
            g = np.asarray(g, dtype=float)
            if g.shape != p.shape:
                raise ShapeMismatch(
                    f"group '{name}': grad shape {g.shape} != param shape {p.shape}"
                )
            if name not in self._m:
                self._m[name] = np.zeros_like(p, dtype=float)
                self._v[name] = np.zeros_like(p, dtype=float)
                self._t[name] = 0
            m, v = self._m[name], self._v[name]
            if m.shape != p.shape:
                raise ShapeMismatch(
                    f"group '{name}': state shape {m.shape} != param shape {p.shape}"
                )
            self._t[name] += 1
            t = self._t[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p -= self.learning_rates[name] * m_hat / (np.sqrt(v_hat) + self.eps)
        return params

    def reset(self):
        """Zero all moments and step counters; learning rates are retained."""
        self._m.clear()
        self._v.clear()
        self._t.clear()
