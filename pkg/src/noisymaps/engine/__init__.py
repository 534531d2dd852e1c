"""Seeded Monte Carlo of perturbed maps on finite dependency cones."""
from .core import (
    DEFAULT_CAP,
    FIRST,
    SECOND,
    CoupleResult,
    ProductInit,
    RunResult,
    SupportSet,
    TrajectoryState,
    couple_run,
    dependency_cone,
    initial_state,
    run,
    second_layer_shortcut,
    step,
)
from .rng import NoiseStream, Stream, derive_seed, mix64
