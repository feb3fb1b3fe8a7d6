"""Sequential weak values of finite coarse-grained quantum histories."""

__version__ = "0.1.0"
