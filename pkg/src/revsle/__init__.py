"""Forward and time-reversed chordal Loewner evolution with exact slit maps,
a Liouville/matter CFT parameter dictionary, exact Verma-module null-vector
checks, and Monte Carlo verification of drift-free boundary observables."""

__version__ = "0.1.0"

from . import cft, driving, loewner, montecarlo, observables, virasoro  # noqa: F401
