"""Cell-free massive-MIMO LEO cluster simulator with joint power allocation and handover."""

__version__ = "0.1.0"
