"""Fixed-time stability certificates and simulation for singularly perturbed systems."""

from .certify import (BoundaryCertificate, CompositeCertificate, InterconnectionBounds,
                      PowerLawCertificate)
from .errors import (CapabilityError, ConfigError, DivergenceError, FxtspError, InadmissibleQError,
                     InfeasibleCertificateError, IntegrationError, InvalidParameterError, StiffnessError)
from .model import SystemModel
from .sim import IntegratorConfig, Trajectory, integrate, settling_time, sweep

__version__ = "0.1.0"
