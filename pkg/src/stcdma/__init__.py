"""Space-time DS-CDMA multiuser detection simulator.

Library layout:

- ``waveform``   spreading codes, QPSK mapping, chip spreading
- ``channel``    Rayleigh fading, power-delay profiles, channel draws
- ``airlink``    system configuration and observation composition
- ``frontend``   effective signatures and despreading
- ``detector``   RAKE / linear / decision-feedback / recurrent receivers
- ``adaptation`` NLMS, SM-NLMS, sensitivity-based recurrent training,
                 and the set-membership variants
- ``engine``     vectorized Monte Carlo transmission loop
- ``harness``    experiment specs, sweeps, CSV output
- ``cli``        command-line entry point
"""

from .airlink import SystemConfig

__all__ = ["SystemConfig"]
__version__ = "0.1.0"
