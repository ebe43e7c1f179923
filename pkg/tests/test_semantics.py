import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bridgelink.abi import ContractAbi, decode_log, encode_log
from bridgelink.chain import Address, ChainId, TokenAmount, Transaction
from bridgelink.semantics import (
    BridgeConfig, ConfigError, CrossChainMetadata, MappingError, UnparseableDeposit, decimal_normalize,
    id_to_chain, lint, parse_metadata,
)

USER = Address("0xb758B6576221a7504A7211307092C23D3eE191c9")
METIS = Address("0x9E32b13ce7f2E80A01932B42553652E053D6ed8e")
LOCK_PROXY = Address("0x250e76987d838a75310c34bf422ea9f1ac4cc906")
WRAPPER = Address("0x" + "3e" * 20)
DEPOSIT_HASH = "0x" + "a7ef" * 16

LOCK_ABI = ContractAbi.from_signatures(
    "event LockEvent(address fromAssetHash, address fromAddress, uint64 toChainId, bytes toAssetHash, "
    "bytes toAddress, uint256 amount)",
    "function lock(address fromAssetHash, uint64 toChainId, bytes toAddress, uint256 amount)",
)

POLY_CONFIG = {
    "version": 1,
    "bridge": "poly",
    "delta_minutes": 80,
    "chains": [{"name": "ethereum", "numeric_id": 2, "label": "Ethereum"},
               {"name": "bsc", "numeric_id": 6, "label": "Binance Smart Chain"},
               {"name": "polygon", "numeric_id": 17, "label": "Polygon"}],
    "contracts": {"ethereum": [{"address": str(LOCK_PROXY), "abi": LOCK_ABI.to_json()}]},
    "rules": [{"event": "LockEvent",
               "bindings": {"fromAddress": {"field": "sender"},
                            "toAddress": {"field": "receiver"},
                            "fromAssetHash": {"field": "asset_s"},
                            "toAssetHash": {"field": "asset_d"},
                            "amount": {"field": "amount_s", "transform": "decimal"},
                            "toChainId": {"field": "chain_d", "transform": "id2chain"}}}],
    "tokens": {"ethereum": {str(METIS): {"decimals": 18, "symbol": "METIS"}},
               "bsc": {str(METIS): {"decimals": 18, "symbol": "METIS"}}},
    "token_map": [],
}


def poly(**over) -> BridgeConfig:
    d = json.loads(json.dumps(POLY_CONFIG))
    d.update(over)
    return BridgeConfig.from_json(d)


def deposit_tx(ts=1680341603):
    return Transaction(DEPOSIT_HASH, 16950000, 3, ts, USER, WRAPPER, 580000000000000, b"", True)


def lock_event(amount=112855947137612614726, chain_id=6, to_addr=None, emitter=LOCK_PROXY):
    to_addr = USER.raw if to_addr is None else to_addr
    ev = LOCK_ABI.event("LockEvent")
    lg = encode_log(ev, [METIS, USER, chain_id, METIS.raw, to_addr, amount],
                    tx_hash=DEPOSIT_HASH, log_index=7, emitter=emitter)
    return decode_log(lg, LOCK_ABI)


def test_worked_example_metadata():
    m = parse_metadata(deposit_tx(), [lock_event()], poly(), chain_s="ethereum")
    assert m.sender == USER and m.receiver == USER
    assert m.timestamp_s == 1680341603
    assert str(m.amount_s) == "112.855947137612614726"
    assert m.chain_d.label == "Binance Smart Chain"
    assert m.asset_s == METIS and m.asset_d == METIS
    assert m.chain_s.name == "ethereum" and m.txhash_s == DEPOSIT_HASH
    assert m.txhash_d is None and m.amount_d is None


def test_amount_exact_rational():
    m = parse_metadata(deposit_tx(), [lock_event()], poly(), chain_s="ethereum")
    assert m.amount_s.value == Fraction(112855947137612614726, 10 ** 18)


def test_no_known_event_unparseable():
    with pytest.raises(UnparseableDeposit):
        parse_metadata(deposit_tx(), [], poly(), chain_s="ethereum")


def test_event_from_foreign_emitter_ignored():
    ev = lock_event(emitter=Address("0x" + "99" * 20))
    with pytest.raises(UnparseableDeposit):
        parse_metadata(deposit_tx(), [ev], poly(), chain_s="ethereum")


def test_unknown_chain_id_names_it():
    with pytest.raises(MappingError, match="999"):
        parse_metadata(deposit_tx(), [lock_event(chain_id=999)], poly(), chain_s="ethereum")


def test_non_20_byte_receiver_rejected():
    with pytest.raises(MappingError, match="32 bytes"):
        parse_metadata(deposit_tx(), [lock_event(to_addr=b"\x01" * 32)], poly(), chain_s="ethereum")


def test_same_chain_rejected():
    with pytest.raises(MappingError):
        parse_metadata(deposit_tx(), [lock_event(chain_id=2)], poly(), chain_s="ethereum")


def test_event_asset_d_wins_over_token_map(caplog):
    other = "0x" + "55" * 20
    cfg = poly(token_map=[{"asset_s": str(METIS), "chain_d": "bsc", "asset_d": other}])
    with caplog.at_level("WARNING", logger="bridgelink.diagnostics"):
        m = parse_metadata(deposit_tx(), [lock_event()], cfg, chain_s="ethereum")
    assert m.asset_d == METIS
    assert any("asset_d mismatch" in r.message for r in caplog.records)


def test_token_map_fills_missing_asset_d():
    d = json.loads(json.dumps(POLY_CONFIG))
    del d["rules"][0]["bindings"]["toAssetHash"]
    mapped = "0x" + "56" * 20
    d["token_map"] = [{"asset_s": str(METIS), "chain_d": "bsc", "asset_d": mapped}]
    m = parse_metadata(deposit_tx(), [lock_event()], BridgeConfig.from_json(d), chain_s="ethereum")
    assert m.asset_d == Address(mapped)


def test_first_matching_rule_wins():
    abi = ContractAbi.from_signatures(
        "event Send(address sender, address receiver, address token, uint256 amount, uint64 dstChainId)",
        "event Deposited(address depositor, address token, uint256 amount, uint64 mintChainId, "
        "address mintAccount)")
    bridge = Address("0x" + "cb" * 20)
    token = Address("0x" + "07" * 20)
    other = Address("0x" + "08" * 20)
    d = {"version": 1, "bridge": "celer", "chains": POLY_CONFIG["chains"],
         "contracts": {"ethereum": [{"address": str(bridge), "abi": abi.to_json()}]},
         "rules": [
             {"event": "Send", "bindings": {
                 "sender": {"field": "sender"}, "receiver": {"field": "receiver"}, "token": {"field": "asset_s"},
                 "amount": {"field": "amount_s", "transform": "decimal"},
                 "dstChainId": {"field": "chain_d", "transform": "id2chain"}}},
             {"event": "Deposited", "bindings": {
                 "depositor": {"field": "sender"}, "mintAccount": {"field": "receiver"},
                 "token": {"field": "asset_s"}, "amount": {"field": "amount_s", "transform": "decimal"},
                 "mintChainId": {"field": "chain_d", "transform": "id2chain"}}}],
         "tokens": {"ethereum": {str(token): {"decimals": 6, "symbol": "USDT"}}}}
    cfg = BridgeConfig.from_json(d)
    send = decode_log(encode_log(abi.event("Send"), [USER, USER, token, 15_000000, 6],
                                 tx_hash=DEPOSIT_HASH, log_index=1, emitter=bridge), abi)
    dep = decode_log(encode_log(abi.event("Deposited"), [USER, token, 20_000000, 17, other],
                                tx_hash=DEPOSIT_HASH, log_index=0, emitter=bridge), abi)
    m = parse_metadata(deposit_tx(), [dep, send], cfg, chain_s="ethereum")
    assert m.chain_d.name == "bsc" and str(m.amount_s) == "15"
    m2 = parse_metadata(deposit_tx(), [dep], cfg, chain_s="ethereum")
    assert m2.chain_d.name == "polygon" and m2.receiver == other


def test_decimal_normalize_examples():
    cfg = poly()
    assert decimal_normalize(0, METIS, cfg, "ethereum").value == 0
    assert decimal_normalize(10 ** 18, METIS, cfg, "ethereum").value == 1
    assert str(decimal_normalize(112855947137612614726, METIS, cfg, "ethereum")) == "112.855947137612614726"


def test_decimal_normalize_unknown_token_lists_sources():
    with pytest.raises(MappingError, match="tokens.ethereum"):
        decimal_normalize(5, Address("0x" + "42" * 20), poly(), "ethereum")


def test_id_to_chain_examples():
    cfg = poly()
    assert id_to_chain(6, cfg).label == "Binance Smart Chain"
    with pytest.raises(MappingError):
        id_to_chain(999, cfg)


def test_id_tables_isolated_per_config():
    a = poly()
    b = poly(bridge="other", chains=[{"name": "ethereum", "numeric_id": 1, "label": "Ethereum"},
                                     {"name": "polygon", "numeric_id": 6, "label": "Polygon"}])
    assert id_to_chain(6, a).name == "bsc"
    assert id_to_chain(6, b).name == "polygon"


def test_config_invariants():
    with pytest.raises(ConfigError, match="not unique"):
        poly(chains=[{"name": "ethereum", "numeric_id": 2}, {"name": "bsc", "numeric_id": 2}])
    bad_rule = json.loads(json.dumps(POLY_CONFIG["rules"]))
    bad_rule[0]["event"] = "Missing"
    with pytest.raises(ConfigError, match="not in any contract ABI"):
        poly(rules=bad_rule)
    short = json.loads(json.dumps(POLY_CONFIG["rules"]))
    del short[0]["bindings"]["toAddress"]
    with pytest.raises(ConfigError, match="receiver"):
        poly(rules=short)
    with pytest.raises(ConfigError, match="version"):
        poly(version=2)


def test_config_round_trip(tmp_path):
    cfg = poly()
    path = tmp_path / "poly.json"
    cfg.save(path)
    again = BridgeConfig.load(path)
    assert again.to_json() == cfg.to_json()
    assert again.source_path == str(path)


def test_lint_warns_on_overlap():
    rules = POLY_CONFIG["rules"] * 2
    assert any("overlaps" in w for w in lint(poly(rules=rules)))
    assert lint(poly()) == []


def test_metadata_json_round_trip():
    m = parse_metadata(deposit_tx(), [lock_event()], poly(), chain_s="ethereum")
    m2 = m.with_withdrawal("0x" + "2f" * 32, TokenAmount(5, 1), 1680341700)
    for x in (m, m2):
        assert CrossChainMetadata.from_json(json.loads(json.dumps(x.to_json()))) == x


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 256 - 1), st.sampled_from([6, 17]), st.binary(min_size=20, max_size=20))
def test_parse_deterministic_and_exact(amount, cid, receiver):
    cfg = poly()
    ev = lock_event(amount=amount, chain_id=cid, to_addr=receiver)
    a = parse_metadata(deposit_tx(), [ev], cfg, chain_s="ethereum")
    b = parse_metadata(deposit_tx(), [ev], cfg, chain_s=ChainId("ethereum", 2, "Ethereum"))
    assert a == b
    assert a.amount_s.value == Fraction(amount, 10 ** 18)
    assert a.receiver == Address(receiver)
