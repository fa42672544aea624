"""Green's functions of the Helmholtz equation in weak optical turbulence.

Free-space kernels, first-order Rytov turbulent Green's functions over
white-noise refractive fields, time-reversal refocusing statistics and
energy-concentration (apodization) eigenproblems, with a batch CLI.
"""

__version__ = "0.1.0"
