"""Cross-chain bridge transaction association: deposit identification and withdrawal matching."""

__version__ = "0.1.0"
