"""Sequential object-and-room navigation agent on a tiny numpy autograd engine."""

__version__ = "0.1.0"
