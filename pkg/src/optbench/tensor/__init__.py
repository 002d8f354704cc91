from .core import Tensor, backward, no_grad
from .gradcheck import grad_check
from . import ops

__all__ = ["Tensor", "backward", "no_grad", "grad_check", "ops"]
