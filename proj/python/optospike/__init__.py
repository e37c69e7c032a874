"""Minimal-time optogenetic spike control."""

from ._core import (
    BangResult,
    ConfigError,
    DirectSolution,
    Error,
    System,
    UnreachableError,
    channel_presets,
    diagnostics,
    neuron_presets,
    physiological_umax,
    run_cli,
    solve_bangbang,
    solve_direct,
    verify_extremal,
)

__all__ = [
    "BangResult",
    "ConfigError",
    "DirectSolution",
    "Error",
    "System",
    "UnreachableError",
    "channel_presets",
    "diagnostics",
    "neuron_presets",
    "physiological_umax",
    "run_cli",
    "solve_bangbang",
    "solve_direct",
    "verify_extremal",
]
