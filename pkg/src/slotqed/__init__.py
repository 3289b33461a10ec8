"""Mean-field Monte-Carlo simulation of dipole-dipole interacting thermal atoms
in a slot waveguide, plus the lineshape / Kerr analysis chain."""

__version__ = "0.1.0"
