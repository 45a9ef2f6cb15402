"""Dynamic-pricing VM scaling for cloud brokers under quantized billing."""
__version__ = "0.1.0"
