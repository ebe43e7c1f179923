from .types import (
    NATIVE, NATIVE_DECIMALS, ZERO_ADDRESS, Address, BlockHeader, ChainId, ChainRecord, LogEntry,
    RecordError, TokenAmount, TraceCall, Transaction, hash32,
)
from .store import DataGapError, FixtureStore, RangeError, StoreError

__all__ = [
    "Address", "BlockHeader", "ChainId", "ChainRecord", "DataGapError", "FixtureStore", "LogEntry",
    "NATIVE", "NATIVE_DECIMALS", "RangeError", "RecordError", "StoreError", "TokenAmount", "TraceCall",
    "Transaction", "ZERO_ADDRESS", "hash32",
]
