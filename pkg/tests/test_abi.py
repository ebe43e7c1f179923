import random

import pytest
from hypothesis import given, settings, strategies as st

from bridgelink.abi import (
    AbiEvent, AbiFunction, ContractAbi, DecodeError, DecodedCall, EncodeError, UnsupportedType,
    decode_input, decode_log, encode_input, encode_log, parse_type,
)
from bridgelink.abi.codec import decode_sequence, encode_sequence
from bridgelink.chain import Address

LOCK = "function lock(address fromAsset, uint64 toChainId, bytes toAddress, uint256 amount, uint256 fee, uint256 id)"
LOCK_EVENT = ("event LockEvent(address fromAssetHash, address fromAddress, uint64 toChainId, "
              "bytes toAssetHash, bytes toAddress, uint256 amount)")
USER = Address("0xb758B6576221a7504A7211307092C23D3eE191c9")
METIS = Address("0x9E32b13ce7f2E80A01932B42553652E053D6ed8e")


def test_lock_decodes_with_named_params():
    abi = ContractAbi.from_signatures(LOCK)
    fn = abi.function("lock")
    assert fn.selector.hex() == "60de1a9b"
    vals = [METIS, 6, USER.raw, 112855947137612614726, 0, 1]
    data = encode_input(DecodedCall.of(fn, vals), abi)
    call = decode_input(data, abi)
    assert call.name == "lock"
    assert call.param_names == ["fromAsset", "toChainId", "toAddress", "amount", "fee", "id"]
    assert [v for _, v in call.params] == vals
    assert encode_input(call, abi) == data


def test_unknown_selector_is_marker():
    call = decode_input(bytes.fromhex("deadbeef"), ContractAbi.from_signatures(LOCK))
    assert not call.known and call.name == "unknown_fn"


def test_short_calldata_rejected():
    with pytest.raises(DecodeError):
        decode_input(b"\x01\x02", ContractAbi())


def test_zero_arg_function_is_selector_only():
    abi = ContractAbi.from_signatures("function pause()")
    fn = abi.function("pause")
    assert encode_input(DecodedCall.of(fn, []), abi) == fn.selector


def test_empty_bytes_layout():
    t = parse_type("bytes")
    assert encode_sequence([t], [b""]) == (32).to_bytes(32, "big") + bytes(32)


def test_trailing_and_short_payloads_rejected():
    abi = ContractAbi.from_signatures(LOCK)
    fn = abi.function("lock")
    data = encode_input(DecodedCall.of(fn, [METIS, 6, b"", 1, 0, 1]), abi)
    with pytest.raises(DecodeError):
        decode_input(data + bytes(32), abi)
    with pytest.raises(DecodeError):
        decode_input(data[:-1], abi)


def test_encode_type_mismatch_names_param():
    abi = ContractAbi.from_signatures(LOCK)
    fn = abi.function("lock")
    with pytest.raises(EncodeError, match="toChainId"):
        encode_input(DecodedCall.of(fn, [METIS, -1, b"", 1, 0, 1]), abi)


def test_deep_tuple_rejected():
    parse_type("(uint256,address)[]")
    with pytest.raises(UnsupportedType):
        parse_type("(uint256,(address,bool))")


def test_dirty_address_rejected():
    t = parse_type("address")
    with pytest.raises(DecodeError):
        decode_sequence([t], b"\x01" + bytes(31))


def test_lock_event_decodes_six_fields():
    ev = AbiEvent.parse(LOCK_EVENT)
    assert ev.topic0.hex() == "8636abd6d0e464fe725a13346c7ac779b73561c705506044a2e6b2cdb1295ea5"
    vals = [METIS, USER, 6, bytes(20), USER.raw, 112855947137612614726]
    log = encode_log(ev, vals, tx_hash="0x" + "ab" * 32, log_index=3, emitter="0x" + "11" * 20)
    dec = decode_log(log, ContractAbi([], [ev]))
    assert dec.known and dec.name == "LockEvent"
    assert [v for _, v in dec.params] == vals


def test_unknown_topic_is_opaque():
    ev = AbiEvent.parse("event Foo(uint256 a)")
    log = encode_log(ev, [1], tx_hash="0x" + "00" * 32, log_index=0, emitter="0x" + "22" * 20)
    dec = decode_log(log, ContractAbi())
    assert not dec.known and dec.name == "0x" + ev.topic0.hex()


def test_indexed_params_come_from_topics():
    ev = AbiEvent.parse("event Transfer(address indexed from, address indexed to, uint256 value)")
    log = encode_log(ev, [USER, METIS, 5], tx_hash="0x" + "00" * 32, log_index=0, emitter=METIS)
    assert len(log.topics) == 3 and len(log.data) == 32
    assert decode_log(log, ContractAbi([], [ev])).as_dict() == {"from": USER, "to": METIS, "value": 5}


def test_log_data_length_mismatch_is_error():
    ev = AbiEvent.parse("event Foo(uint256 a, uint256 b)")
    log = encode_log(ev, [1, 2], tx_hash="0x" + "00" * 32, log_index=4, emitter=METIS)
    bad = type(log)(log.tx_hash, log.log_index, log.emitter, log.topics, log.data[:32])
    with pytest.raises(DecodeError, match="log 4"):
        decode_log(bad, ContractAbi([], [ev]))


def test_json_abi_round_trip():
    abi = ContractAbi.from_signatures(LOCK, LOCK_EVENT, "function multi((uint256,address)[] xs, bytes32[2] ys)")
    again = ContractAbi.from_json(abi.to_json())
    assert set(again.functions) == set(abi.functions)
    assert set(again.events) == set(abi.events)


# -- randomized round-trips ----------------------------------------------------

ELEMENTARY = ["uint8", "uint64", "uint256", "int16", "int256", "address", "bool", "bytes1", "bytes20",
              "bytes32", "bytes", "string"]


def _rand_type(rng, depth=0):
    r = rng.random()
    if r < 0.6 or depth >= 2:
        return rng.choice(ELEMENTARY)
    if r < 0.75:
        return _rand_type(rng, depth + 1) + "[]"
    if r < 0.87:
        return _rand_type(rng, depth + 1) + f"[{rng.randint(1, 3)}]"
    if depth > 0:
        return rng.choice(ELEMENTARY)
    comps = [rng.choice(ELEMENTARY + ["uint256[]"]) for _ in range(rng.randint(1, 3))]
    return "(" + ",".join(comps) + ")"


def _rand_value(rng, t):
    k = t.kind
    if k == "uint":
        return rng.choice([0, (1 << t.size) - 1, rng.getrandbits(t.size)])
    if k == "int":
        lim = 1 << (t.size - 1)
        return rng.choice([-lim, lim - 1, rng.randrange(-lim, lim)])
    if k == "address":
        return Address(bytes(rng.getrandbits(8) for _ in range(20)))
    if k == "bool":
        return rng.random() < 0.5
    if k == "fixedbytes":
        return bytes(rng.getrandbits(8) for _ in range(t.size))
    if k == "bytes":
        return bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 70)))
    if k == "string":
        return "".join(rng.choice("abcé☃ xyz") for _ in range(rng.randint(0, 40)))
    if k == "array":
        n = t.size if t.size is not None else rng.randint(0, 4)
        return [_rand_value(rng, t.item) for _ in range(n)]
    return tuple(_rand_value(rng, c) for c in t.components)


def test_thousand_random_calls_round_trip():
    rng = random.Random(20240401)
    for i in range(1000):
        types = [_rand_type(rng) for _ in range(rng.randint(0, 5))]
        decl = f"function f{i}(" + ", ".join(f"{ty} p{j}" for j, ty in enumerate(types)) + ")"
        abi = ContractAbi.from_signatures(decl)
        fn = abi.function(f"f{i}")
        vals = [_rand_value(rng, p.type) for p in fn.params]
        data = encode_input(DecodedCall.of(fn, vals), abi)
        call = decode_input(data, abi)
        assert [v for _, v in call.params] == vals, decl
        assert encode_input(call, abi) == data


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2**256 - 1), st.binary(max_size=80), st.text(max_size=20)), max_size=4))
def test_decode_encode_identity_property(rows):
    types = [parse_type("(uint256,bytes,string)[]")]
    data = encode_sequence(types, [list(rows)])
    assert decode_sequence(types, data) == [list(rows)]
    assert encode_sequence(types, decode_sequence(types, data)) == data


@settings(max_examples=300, deadline=None)
@given(st.binary(min_size=0, max_size=200))
def test_random_bytes_never_crash_decoder(blob):
    types = [parse_type(t) for t in ("uint256", "bytes", "address[]")]
    try:
        vals = decode_sequence(types, blob)
    except DecodeError:
        return
    assert encode_sequence(types, vals) == blob
