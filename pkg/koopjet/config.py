"""Configuration constants for the koopjet toolkit."""

# Reference conditions
P_REF: float = 101325.0  # Pa, reference pressure for corrected quantities
T_REF: float = 288.0  # K, reference temperature for corrected quantities
N_NOMINAL: float = 14000.0  # RPM, nominal spool speed used for relative speed

# Sampling
DT: float = 0.01  # s, sampling period of every simulation and dataset

# Normalization defaults
O_N: float = 5000.0  # RPM offset (ground idle)
S_N: float = 10000.0  # RPM scale
O_W: float = 0.04  # kg/s offset (ground idle fuel flow)
S_W: float = 0.8  # kg/s scale

# Measurement
NOISE_SIGMA_RPM: float = 50.0  # Standard deviation of spool-speed sensor noise

# Exit codes
EXIT_OK: int = 0
EXIT_UNEXPECTED: int = 1
EXIT_CONFIG_ERROR: int = 2
EXIT_NUMERICAL_FAILURE: int = 3
EXIT_INFEASIBLE: int = 4

# Environment overrides
ENV_OUT: str = "KOOPJET_OUT"
ENV_SEED: str = "KOOPJET_SEED"

# Config schema
SCHEMA_VERSION: int = 1
