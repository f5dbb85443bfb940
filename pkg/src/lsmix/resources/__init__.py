from .catalogue import catalogue

__all__ = ["catalogue"]
