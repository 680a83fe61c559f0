"""Frame, Riesz-sequence and Riesz-basis classification of integer exponentials
``E(Z^d)`` on domains, via the covering function and Gram-matrix spectra."""

from importlib import import_module

from .classify import *  # noqa: F401,F403
from .covering import *  # noqa: F401,F403
from .errors import ExpBasisError, NumericalError, ResourceError, ValidationError
from .geometry import *  # noqa: F401,F403
from .spectral import *  # noqa: F401,F403

# the submodule name ``classify`` is shadowed by the function of that name
__all__ = [name for mod in ("geometry", "covering", "classify", "spectral")
           for name in import_module(f".{mod}", __name__).__all__]
__all__ += ["ExpBasisError", "ValidationError", "ResourceError", "NumericalError"]
__version__ = "0.1.0"
