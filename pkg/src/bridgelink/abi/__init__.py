"""Contract ABI handling: Keccak-256, the standard encoding, calldata and log decoding."""

from .codec import (
    AbiError, AbiType, DecodeError, EncodeError, UnsupportedType, decode_sequence, encode_sequence,
    parse_type,
)
from .contract import (
    ERC20_ABI, TRANSFER_TOPIC, UNKNOWN_FUNCTION, AbiEvent, AbiFunction, AbiParam, AbiRegistry,
    ContractAbi, DecodedCall, DecodedEvent, decode_input, decode_log, encode_input, encode_log,
    unknown_call,
)
from .keccak import keccak256

__all__ = [
    "AbiError", "AbiEvent", "AbiFunction", "AbiParam", "AbiRegistry", "AbiType", "ContractAbi",
    "DecodeError", "DecodedCall", "DecodedEvent", "ERC20_ABI", "EncodeError", "TRANSFER_TOPIC",
    "UNKNOWN_FUNCTION", "UnsupportedType", "decode_input", "decode_log", "decode_sequence",
    "encode_input", "encode_log", "encode_sequence", "keccak256", "parse_type", "unknown_call",
]
