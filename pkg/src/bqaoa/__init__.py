"""QAOA compilation and noisy evaluation for bipotent quantum devices.

A bipotent device offers two implementations of the CX gate on different
qubit pairs (a short monolithic form and an echoed cross-resonance form
that supports pulse-level optimization).  This package encodes dense Ising
problems, builds linear swap-network QAOA circuits, maps them onto device
chains under four selection strategies, lowers gates per edge flavor and
optimization level, and evaluates the result by fidelity score, schedule
duration, CX count and noisy-simulation metrics.
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled device or problem file (e.g. 'ehningen.json')."""
    return Path(resources.files("bqaoa").joinpath("data", name))
