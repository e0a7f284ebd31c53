"""Classification of single-qubit dephasing channels from two-time SIC-POVM data."""

from .qchannel import (
    ColoredNoiseParams,
    DensityMatrix,
    OhmicBathParams,
    dephase,
    gamma_function,
    lambda_classical,
    lambda_quantum,
    rtn_kernel,
)

__version__ = "0.1.0"
