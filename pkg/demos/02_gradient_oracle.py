"""Finite-difference verification of the hand-rolled gradients.

Every architecture variant is built at reduced width in 64-bit mode and
each trainable parameter is perturbed both ways; analytic and numeric
derivatives must agree to better than 1e-4 relative error.
"""

from loadcycle.nn import VARIANTS, ModelSpec
from loadcycle.train import grad_check

for variant in VARIANTS:
    err = grad_check(ModelSpec(variant), ws=5, seed=0)
    print(f"{variant:16s} ws=5  max relative error {err:.2e}  {'ok' if err < 1e-4 else 'FAIL'}")
