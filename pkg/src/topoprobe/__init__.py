"""topoprobe: unsupervised detection of topological phase transitions.

Predictive models are trained to regress the tuning parameter beta from
Monte Carlo-sampled spin data; peaks in the derivative of the prediction
curve locate transitions and crossovers.  Every statistical component is
cross-checked against exact enumeration oracles at small lattice sizes.
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: F401
    FieldConfig,
    LatticeGeometry,
    SpinConfig,
    build_geometry,
)
from .data import LabeledDataset  # noqa: F401
