"""
Adam optimizer over a ParamRegistry, mask-aware
"""

from typing import Dict

import numpy as np

from nn_layers.registry import ParamRegistry
from tensor_core.errors import ContractError


class Adam:
    """
    Adam with bias correction

    Gradients of masked-out entries are zeroed before the moment update, and
    masks are re-applied to weights and moments after every step, so pruned
    weights stay exactly zero. Frozen parameters are skipped.
    """

    def __init__(self, registry: ParamRegistry, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        if lr < 0:
            raise ContractError(f"Learning rate must be non-negative, got {lr}")
        self.registry = registry
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def zero_grad(self):
        self.registry.zero_grad()

    def step(self):
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps

        for name, entry in self.registry.items():
            if entry.frozen or entry.weight.grad is None:
                continue
            grad = entry.weight.grad
            if entry.mask is not None:
                grad = grad * entry.mask
            m = self.m.setdefault(name, np.zeros_like(grad))
            v = self.v.setdefault(name, np.zeros_like(grad))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad

            update = self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            entry.weight.data -= update
            if entry.mask is not None:
                entry.weight.data *= entry.mask
                m *= entry.mask
                v *= entry.mask

    def sync_masks(self):
        """Zero the moments of entries masked since the last step"""
        for name, entry in self.registry.items():
            if entry.mask is not None and name in self.m:
                self.m[name] *= entry.mask
                self.v[name] *= entry.mask
