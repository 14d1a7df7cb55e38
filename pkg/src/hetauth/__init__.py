"""Anonymous mutual authentication and key agreement between a PKI user and a
certificateless sensor node, brokered by a gateway.

The layers, bottom up:

* :mod:`hetauth.algebra`: pairing groups (toy oracle and BLS12-381)
* :mod:`hetauth.hashes`: domain-separated H0..H4 and the session MAC
* :mod:`hetauth.scheme`: registration algorithms and signcryption
* :mod:`hetauth.engine`: stateful gateway, user and sensor parties
* :mod:`hetauth.wire` / :mod:`hetauth.transport`: codec, simnet, TCP
* :mod:`hetauth.attacks`, :mod:`hetauth.bench`, :mod:`hetauth.cli`
"""

from hetauth.algebra import BACKEND_NAMES, get_backend
from hetauth.engine import Deployment, Gateway, Sensor, ServiceNode, User, deploy
from hetauth.errors import AuthenticationFailed, ProtocolError, RegistrationError, Rejected
from hetauth.scheme import SystemParams, setup, signcrypt, unsigncrypt

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAMES",
    "AuthenticationFailed",
    "Deployment",
    "Gateway",
    "ProtocolError",
    "RegistrationError",
    "Rejected",
    "Sensor",
    "ServiceNode",
    "SystemParams",
    "User",
    "deploy",
    "get_backend",
    "setup",
    "signcrypt",
    "unsigncrypt",
]
