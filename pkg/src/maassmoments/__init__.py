"""Desk-scale numerical verification of spectral identities for level-1
Maass-form central L-values: certified special functions, Bessel kernels of
imaginary order, Kuznetsov/Motohashi trace-formula checks, mollified moments,
and the nonvanishing-count chain.
"""

__version__ = "0.1.0"
