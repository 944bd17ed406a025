"""primnav: local navigation from depth images with a learned collision predictor.

The package bundles a 2.5-D depth-camera simulator, a velocity/steering
motion-primitive library, a small from-scratch neural network stack with
exact gradients, unscented-transform and Monte-Carlo-dropout uncertainty
propagation, and a receding-horizon planner, plus the data-collection,
training and evaluation harness that ties them together.
"""

__version__ = "0.1.0"

from .angles import wrap_angle
from .config import Config, load_config

__all__ = ["Config", "load_config", "wrap_angle", "__version__"]
