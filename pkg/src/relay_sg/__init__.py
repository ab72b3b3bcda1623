"""Relay-assisted sensor networks: SNR statistics of cooperative relay schemes.

Relays form a Poisson point process, fading is log-normal shadowing times
multipath. The package offers closed forms (``analytic``), Laplace-transform
numerics (``transform``) and an independent Monte Carlo simulator
(``simulate``).
"""

from .model import NetworkParams, TapProfile, build_tap_profile, effective_densities, table_one_params

__all__ = ["NetworkParams", "TapProfile", "build_tap_profile", "effective_densities",
           "table_one_params"]
__version__ = "0.1.0"
