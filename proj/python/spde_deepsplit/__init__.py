"""Deep splitting solver for semilinear SPDEs (Python bindings)."""

from ._core import (
    adam_step,
    forward_train,
    init_params,
    lr_at,
    normals,
    param_count,
    param_grad,
    philox4x32,
    reference_heat_additive,
    reference_heat_mult,
    rel_l2,
    run_experiment,
    selftest,
)

__all__ = [
    "adam_step",
    "forward_train",
    "init_params",
    "lr_at",
    "normals",
    "param_count",
    "param_grad",
    "philox4x32",
    "reference_heat_additive",
    "reference_heat_mult",
    "rel_l2",
    "run_experiment",
    "selftest",
]
