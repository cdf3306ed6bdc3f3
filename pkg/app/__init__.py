"""polariton-lab: disordered cavity polaritons in the Fano-Anderson model."""

__version__ = "0.1.0"
