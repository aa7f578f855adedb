"""Forward simulation and inverse estimation for a Sagnac-loop frequency-bin
entangled photon-pair source.

Subpackages follow the pipeline: :mod:`freqbin.statekit` (state algebra),
:mod:`freqbin.counting` (photon-counting statistics), :mod:`freqbin.beating`
(interferogram synthesis), :mod:`freqbin.estimation` (fits, density matrix,
bootstrap) and :mod:`freqbin.cli_io` (config, file formats, plots, CLI).
"""

__version__ = "0.1.0"
