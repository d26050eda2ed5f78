"""Adaptive LQR for over-actuated plants that switch between actuator subsets.

Subpackages: plant model and Riccati oracle (`model`), self-normalized least
squares and confidence ellipsoids (`estimation`), cross-mode projection
geometry (`ellipsoid`), covariance SDPs (`sdp`), warm-up and the switching
controller (`control`), regret accounting and the restart baseline
(`regret`), and the experiment CLI (`cli`).
"""

from .model import LinearSwitchedSystem, Mode, NoiseModel

__all__ = ["LinearSwitchedSystem", "Mode", "NoiseModel"]
__version__ = "0.1.0"
