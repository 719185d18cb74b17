"""Impedance side-channel analysis toolkit.

Models frequency-dependent chip impedance, synthesizes data-dependent S11
traces from a simulated device under test, and mounts differential,
correlation, and template impedance attacks that recover AES key bytes,
including Boolean-masked keys, from single or few traces.
"""

from .trace import ComplexTrace, FrequencyGrid, TraceBatch

__all__ = ["ComplexTrace", "FrequencyGrid", "TraceBatch"]
__version__ = "0.1.0"
