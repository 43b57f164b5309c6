"""Self-stabilizing token rings over weak registers."""
from .protocols import KINDS, make_protocol
from .ring import Configuration, is_legitimate, privileged, render

__version__ = "0.1.0"
__all__ = ["KINDS", "make_protocol", "Configuration", "is_legitimate", "privileged", "render"]
