"""Parse one hand-built lock deposit and check a withdrawal against the fee rule.

The deposit moves 112.855947137612614726 METIS from Ethereum toward Binance
Smart Chain. The second half looks at a 15 USDT transfer that arrives as
14.64255 USDT.

    python3 demos/lock_example.py
"""

import json
from fractions import Fraction

from bridgelink.abi import ContractAbi, decode_log, encode_log
from bridgelink.chain import Address, ChainId, TokenAmount, Transaction
from bridgelink.semantics import BridgeConfig, parse_metadata

USER = Address("0xb758B6576221a7504A7211307092C23D3eE191c9")
METIS = Address("0x9E32b13ce7f2E80A01932B42553652E053D6ed8e")
PROXY = Address("0x250e76987d838a75310c34bf422ea9f1ac4cc906")
TX = "0x" + "a7ef" * 16

abi = ContractAbi.from_signatures(
    "event LockEvent(address fromAssetHash, address fromAddress, uint64 toChainId, bytes toAssetHash, "
    "bytes toAddress, uint256 amount)")
config = BridgeConfig.from_json({
    "version": 1, "bridge": "lockbridge", "delta_minutes": 80,
    "chains": [{"name": "ethereum", "numeric_id": 2, "label": "Ethereum"},
               {"name": "bsc", "numeric_id": 6, "label": "Binance Smart Chain"}],
    "contracts": {"ethereum": [{"address": str(PROXY), "abi": abi.to_json()}]},
    "rules": [{"event": "LockEvent", "bindings": {
        "fromAddress": {"field": "sender"}, "toAddress": {"field": "receiver"},
        "fromAssetHash": {"field": "asset_s"}, "toAssetHash": {"field": "asset_d"},
        "amount": {"field": "amount_s", "transform": "decimal"},
        "toChainId": {"field": "chain_d", "transform": "id2chain"}}}],
    "tokens": {"ethereum": {str(METIS): {"decimals": 18, "symbol": "METIS"}}},
    "token_map": [],
})

log = encode_log(abi.event("LockEvent"), [METIS, USER, 6, METIS.raw, USER.raw, 112855947137612614726],
                 tx_hash=TX, log_index=7, emitter=PROXY)
tx = Transaction(TX, 16950000, 3, 1680341603, USER, Address("0x" + "3e" * 20), 580000000000000, b"", True)
meta = parse_metadata(tx, [decode_log(log, abi)], config, chain_s="ethereum")
print(json.dumps(meta.to_json(), indent=1))

sent, received = TokenAmount.parse("15", 6), TokenAmount.parse("14.64255", 18)
delta = (sent.value - received.value) / sent.value
print(f"fee ratio {delta} = {float(delta):.5f}; inside the 3% bound: {delta <= Fraction(3, 100)}")
