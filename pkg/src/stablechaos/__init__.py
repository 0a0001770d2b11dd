"""Monte Carlo tools for mean-field particle systems with heavy-tailed
collateral jumps, their coupled stable drivers, and conditional mean-field
limits."""

__version__ = "0.1.0"
