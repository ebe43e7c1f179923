import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bridgelink.abi import ERC20_ABI, encode_log
from bridgelink.chain import NATIVE, Address, BlockHeader, ChainId, DataGapError, FixtureStore, TokenAmount, Transaction
from bridgelink.matcher import (
    AMBIGUOUS, MATCHED, ZERO_HIT, Candidate, ConfigError, GroundTruthGap, MatcherConfig, MatchResult,
    apply_rule1_asset, apply_rule2_time, apply_rule3_amount, baseline_ykm, build_search_space, fee_ratio,
    match, score, summary_csv,
)
from bridgelink.semantics import BridgeConfig, CrossChainMetadata, TokenInfo

ETH = ChainId("ethereum", 1, "Ethereum")
BSC = ChainId("bsc", 56, "Binance Smart Chain")
T0 = 1624880231
USDT_E = Address("0x" + "de" * 20)
USDT_B = Address("0x" + "55" * 20)
BUSD = Address("0x" + "e9" * 20)
ROUTER = Address("0x" + "cb" * 20)
RELAYER = Address("0x" + "0e" * 20)
BLOCK = 3

CFG = BridgeConfig(
    "celer", (ETH, BSC), {}, (),
    tokens={"ethereum": {USDT_E: TokenInfo(6, "USDT")},
            "bsc": {USDT_B: TokenInfo(18, "USDT"), BUSD: TokenInfo(18, "BUSD")}},
    delta_minutes=60)


def user(i):
    return Address(f"0x{0xabc0000 + i:040x}")


class Dest:
    """A hand-built destination chain with one header every BLOCK seconds."""

    def __init__(self, start=T0 - 600, span=4 * 3600):
        self.start = start
        self.recs = [BlockHeader(n, start + n * BLOCK) for n in range(span // BLOCK + 1)]
        self.seq = 0

    def at(self, t):
        n = -(-(t - self.start) // BLOCK)
        return n, self.start + n * BLOCK

    def credit(self, receiver, t, amount_raw, asset=USDT_B):
        n, ts = self.at(t)
        self.seq += 1
        h = f"0x{self.seq:064x}"
        if asset == NATIVE:
            self.recs.append(Transaction(h, n, self.seq, ts, RELAYER, receiver, amount_raw, b""))
        else:
            self.recs.append(Transaction(h, n, self.seq, ts, RELAYER, ROUTER, 0, b"\x01\x02\x03\x04"))
            self.recs.append(encode_log(ERC20_ABI.event("Transfer"), [ROUTER, receiver, amount_raw],
                                        tx_hash=h, log_index=0, emitter=asset))
        return h

    def store(self):
        s = FixtureStore()
        s.append("bsc", self.recs)
        return s


def meta(receiver, amount="15", t=T0, asset=USDT_E, decimals=6, n=0):
    return CrossChainMetadata(f"0x{0xd0000 + n:064x}", ETH, receiver, asset, TokenAmount.parse(amount, decimals),
                              t, BSC, receiver)


def usdt(text):
    return TokenAmount.parse(text, 18).raw


def cand(h="0x01", t=T0, amount="14", asset=USDT_B):
    return Candidate(h, 1, 0, t, asset, TokenAmount.parse(amount, 18))


M_CFG = MatcherConfig(Fraction(60))


# -- config ------------------------------------------------------------------------

def test_matcher_config_invariants():
    with pytest.raises(ConfigError):
        MatcherConfig(Fraction(20))  # tau0 30 > delta 20
    with pytest.raises(ConfigError):
        MatcherConfig(60, fee_schedule=(Fraction(1, 10), Fraction(1, 20), Fraction(1)))
    with pytest.raises(ConfigError):
        MatcherConfig(60, fee_schedule=(Fraction(1, 10), Fraction(1, 2)))
    cfg = MatcherConfig(Fraction(45), tau0=Fraction(10))
    assert MatcherConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


# -- search space ------------------------------------------------------------------

def test_inactive_receiver_empty_space():
    d = Dest()
    d.credit(user(2), T0 + 60, usdt("14"))
    assert build_search_space(meta(user(1)), 60, d.store(), CFG) == []


def test_space_contains_true_withdrawal_with_decoded_amount():
    d = Dest()
    h = d.credit(user(1), T0 + 200, usdt("14.64255"))
    space = build_search_space(meta(user(1)), 60, d.store(), CFG)
    assert [c.tx_hash for c in space] == [h]
    assert space[0].asset == USDT_B and str(space[0].amount) == "14.64255"


def test_outgoing_only_tx_excluded():
    d = Dest()
    n, ts = d.at(T0 + 90)
    d.recs.append(Transaction("0x" + "77" * 32, n, 99, ts, user(1), ROUTER, 0, b""))
    assert build_search_space(meta(user(1)), 60, d.store(), CFG) == []


def test_missing_range_is_data_gap():
    d = Dest(span=600)
    with pytest.raises(DataGapError):
        build_search_space(meta(user(1)), 60, d.store(), CFG)


def test_space_count_monotone_in_delta():
    d = Dest()
    rng = random.Random(4)
    for _ in range(40):
        d.credit(user(1), T0 + rng.randrange(-300, 3 * 3600), usdt("1"))
    s = d.store()
    sizes = [len(build_search_space(meta(user(1)), delta, s, CFG)) for delta in range(5, 181, 5)]
    assert sizes == sorted(sizes)
    assert sizes[-1] > sizes[0]


# -- rules -------------------------------------------------------------------------

def test_rule1_wrong_asset_dropped():
    m = meta(user(1))
    assert apply_rule1_asset([cand(asset=BUSD), cand(asset=NATIVE)], m, CFG) == []
    assert apply_rule1_asset([cand("0xa", asset=BUSD), cand("0xb")], m, CFG) == [cand("0xb")]


def test_rule1_exact_address_when_asset_d_known():
    from dataclasses import replace
    m = replace(meta(user(1)), asset_d=BUSD)
    assert apply_rule1_asset([cand("0xa", asset=BUSD), cand("0xb")], m, CFG) == [cand("0xa", asset=BUSD)]


def test_rule1_token_map_before_symbol():
    from dataclasses import replace
    cfg = replace(CFG, token_map={(USDT_E, "bsc"): BUSD})
    assert apply_rule1_asset([cand("0xa", asset=BUSD), cand("0xb")], meta(user(1)), cfg) == [cand("0xa", asset=BUSD)]


def test_rule2_closed_bound_and_negative_interval():
    m = meta(user(1))
    at_tau = cand("0xa", t=T0 + 30 * 60)
    after = cand("0xb", t=T0 + 30 * 60 + 1)
    before = cand("0xc", t=T0 - 1)
    assert apply_rule2_time([at_tau, after, before], m, 30) == [at_tau]
    with pytest.raises(ValueError):
        apply_rule2_time([at_tau], m, 0)


def test_rule3_fee_case():
    m = meta(user(1), "15")
    c = cand(amount="14.64255")
    assert fee_ratio(m, c) == Fraction("0.02383")
    assert apply_rule3_amount([c], m, Fraction(3, 100)) == [c]
    assert apply_rule3_amount([c], m, Fraction(2, 100)) == []


def test_rule3_equal_and_excess_amounts():
    m = meta(user(1), "15")
    same, more = cand("0xa", amount="15"), cand("0xb", amount="15.01")
    assert fee_ratio(m, same) == 0
    assert apply_rule3_amount([same, more], m, Fraction(3, 100)) == [same]


candidates = st.lists(st.builds(
    lambda i, dt, amt, asset: Candidate(f"0x{i:04x}", 1, 0, T0 + dt, asset, TokenAmount(amt, 18)),
    st.integers(0, 9999), st.integers(-600, 7200), st.integers(0, 30 * 10 ** 18),
    st.sampled_from([USDT_B, BUSD, NATIVE])), max_size=25)


@settings(max_examples=100, deadline=None)
@given(candidates, st.integers(1, 120), st.sampled_from([Fraction(3, 100), Fraction(1, 2), Fraction(1)]),
       st.randoms(use_true_random=False))
def test_rules_are_order_independent_filters(cands, tau, bound, rnd):
    m = meta(user(1))
    shuffled = list(cands)
    rnd.shuffle(shuffled)
    for rule in (lambda c: apply_rule1_asset(c, m, CFG), lambda c: apply_rule2_time(c, m, tau),
                 lambda c: apply_rule3_amount(c, m, bound)):
        out = rule(cands)
        assert set(out) <= set(cands)
        assert set(rule(shuffled)) == set(out)


# -- match -------------------------------------------------------------------------

def test_clean_pair_matched_without_relaxation():
    d = Dest()
    h = d.credit(user(1), T0 + 211, usdt("14.64255"))
    d.credit(user(1), T0 + 400, usdt("3"), asset=BUSD)
    r = match(meta(user(1)), M_CFG, d.store(), CFG)
    assert (r.outcome, r.withdrawal, r.relaxations) == (MATCHED, h, 0)
    assert r.counts == {"space": 2, "rule1": 1, "rule2": 1, "rule3": 1}
    assert str(r.amount_d) == "14.64255" and r.timestamp_d >= T0 + 211


def test_pair_at_31_minutes_needs_one_tau_relaxation():
    d = Dest()
    h = d.credit(user(1), T0 + 31 * 60, usdt("14.9"))
    m = meta(user(1), t=d.at(T0)[1])
    assert apply_rule2_time(build_search_space(m, 60, d.store(), CFG), m, 30) == []
    r = match(m, M_CFG, d.store(), CFG)
    assert (r.outcome, r.withdrawal, r.relaxations, r.tau) == (MATCHED, h, 1, Fraction(33))
    assert [s["action"] for s in r.audit] == ["search", "filter", "relax_tau", "filter", "finish"]


def test_fee_bound_relaxed_after_tau_reaches_delta():
    d = Dest()
    h = d.credit(user(1), T0 + 100, usdt("14"))  # 6.67% fee
    r = match(meta(user(1)), M_CFG, d.store(), CFG)
    assert r.outcome == MATCHED and r.withdrawal == h
    assert r.fee_bound == Fraction(10, 100) and r.tau == 60


def test_deleted_withdrawal_zero_hit_after_full_relaxation():
    d = Dest()
    d.credit(user(1), T0 + 100, usdt("3"), asset=BUSD)
    r = match(meta(user(1)), M_CFG, d.store(), CFG)
    assert r.outcome == ZERO_HIT and r.withdrawal is None
    assert r.delta == 120 and r.fee_bound == 1
    assert r.iterations <= M_CFG.max_iterations
    assert "widen_delta" in [s["action"] for s in r.audit]


def test_widened_delta_finds_late_withdrawal():
    d = Dest()
    h = d.credit(user(1), T0 + 90 * 60, usdt("14.9"))
    r = match(meta(user(1)), M_CFG, d.store(), CFG)
    assert r.outcome == MATCHED and r.withdrawal == h and r.delta == 120
    assert r.counts["space"] == 0 and r.counts["space_2x"] == 1


def test_decoys_resolved_by_smallest_fee():
    d = Dest()
    t = T0 + 120
    true_raw = usdt("14.925")  # 0.5% fee
    d.credit(user(1), t, true_raw * 999 // 1000)
    h = d.credit(user(1), t, true_raw)
    d.credit(user(1), t, true_raw * 9995 // 10000)
    r = match(meta(user(1)), M_CFG, d.store(), CFG)
    assert r.outcome == MATCHED and r.withdrawal == h and r.ambiguous_resolved
    assert r.audit[-2]["action"] == "tie_break"


def test_shrinking_tau_separates_candidates():
    d = Dest()
    h = d.credit(user(1), T0 + 5 * 60, usdt("14.9"))
    d.credit(user(1), T0 + 25 * 60, usdt("14.95"))
    r = match(meta(user(1)), M_CFG, d.store(), CFG)
    assert r.outcome == MATCHED and r.withdrawal == h and not r.ambiguous_resolved
    assert r.tau == 15


def test_without_tie_break_ambiguity_reported():
    d = Dest()
    d.credit(user(1), T0 + 120, usdt("14.9"))
    d.credit(user(1), T0 + 120, usdt("14.8"))
    cfg = MatcherConfig(Fraction(60), tie_break=False)
    r = match(meta(user(1)), cfg, d.store(), CFG)
    assert r.outcome == AMBIGUOUS and r.withdrawal is None and r.counts["final"] == 2


def test_zero_amount_rejected():
    d = Dest()
    with pytest.raises(ValueError):
        match(meta(user(1), "0"), M_CFG, d.store(), CFG)


def test_result_json_round_trip_and_determinism():
    d = Dest()
    d.credit(user(1), T0 + 120, usdt("14.9"))
    d.credit(user(1), T0 + 120, usdt("14.8"))
    s = d.store()
    a, b = match(meta(user(1)), M_CFG, s, CFG), match(meta(user(1)), M_CFG, s, CFG)
    assert a == b
    assert MatchResult.from_json(json.loads(json.dumps(a.to_json()))) == a


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-300, 3 * 3600), st.integers(1, 20 * 10 ** 18),
                          st.sampled_from([USDT_B, BUSD])), max_size=12),
       st.integers(10, 120))
def test_match_terminates_and_is_consistent(credits, delta):
    d = Dest(span=5 * 3600)  # headers must cover the widened 2 * delta window
    for dt, raw, asset in credits:
        d.credit(user(1), T0 + dt, raw, asset)
    cfg = MatcherConfig(Fraction(delta), tau0=Fraction(min(30, delta)), max_iterations=64)
    r = match(meta(user(1)), cfg, d.store(), CFG)
    assert r.iterations <= cfg.max_iterations
    assert r.outcome in (MATCHED, ZERO_HIT)
    if r.outcome == MATCHED:
        assert r.withdrawal in {x.tx_hash for x in build_search_space(meta(user(1)), delta * 2, d.store(), CFG)}


def test_matched_set_monotone_in_delta():
    d = Dest()
    rng = random.Random(11)
    ms = []
    for i in range(40):
        t = T0 + i * 30
        ms.append(meta(user(i), t=t, n=i))
        d.credit(user(i), t + rng.choice([60, 600, 2000, 4000, 6000]), usdt("14.9"))
    s = d.store()
    matched = []
    for delta in (15, 30, 45, 60, 90):
        cfg = MatcherConfig(Fraction(delta), tau0=Fraction(min(30, delta)))
        matched.append({r.deposit for r in (match(m, cfg, s, CFG) for m in ms) if r.outcome == MATCHED})
    for a, b in zip(matched, matched[1:]):
        assert a <= b


# -- baseline ----------------------------------------------------------------------

def deposit_tx(i, value, t=T0, frm=None):
    frm = frm or user(i)
    return Transaction(f"0x{0xe0000 + i:064x}", 1, i, t, frm, ROUTER, value, b"")


def test_baseline_fails_on_token_deposits():
    d = Dest()
    ms, deps, truth = [], [], {}
    for i in range(10):
        t = T0 + i * 60
        ms.append(meta(user(i), t=t, n=i))
        truth[ms[-1].txhash_s] = d.credit(user(i), t + 120, usdt("14.9"))
        deps.append((Transaction(ms[-1].txhash_s, 1, i, t, user(i), ROUTER, 0, b""), "bsc"))
    s = d.store()
    base = score(baseline_ykm(deps, M_CFG, s), truth)
    ours = score([match(m, M_CFG, s, CFG) for m in ms], truth)
    assert base.mr == 0 and ours.mr == 1


def test_baseline_unique_native_amount():
    d = Dest()
    h = d.credit(user(1), T0 + 120, 10 ** 18 - 10 ** 15, asset=NATIVE)
    d.credit(user(2), T0 + 130, 5 * 10 ** 18, asset=NATIVE)
    r, = baseline_ykm([(deposit_tx(1, 10 ** 18), "bsc")], M_CFG, d.store())
    assert r.outcome == MATCHED and r.withdrawal == h


def test_baseline_ambiguous_where_receiver_resolves():
    d = Dest()
    h = d.credit(user(1), T0 + 120, 10 ** 18, asset=NATIVE)
    for i in range(10):
        d.credit(user(100 + i), T0 + 120 + i, 10 ** 18, asset=NATIVE)
    s = d.store()
    r, = baseline_ykm([(deposit_tx(1, 10 ** 18), "bsc")], M_CFG, s)
    assert r.outcome == AMBIGUOUS and r.counts["space"] == 11
    m = meta(user(1), "1", asset=NATIVE, decimals=18)
    assert match(m, M_CFG, s, CFG).withdrawal == h


# -- scoring -----------------------------------------------------------------------

def test_score_all_matched():
    rs = [MatchResult(f"d{i}", MATCHED, f"w{i}") for i in range(3)]
    rates = score(rs, {f"d{i}": f"w{i}" for i in range(3)})
    assert (rates.mr, rates.zhr, rates.whr) == (1, 0, 0)
    assert rates.rendered()["MR"] == "100.00%"


def test_score_one_in_four_zero_hit():
    d = Dest()
    ms, truth = [], {}
    for i in range(4):
        ms.append(meta(user(i), t=T0 + i * 60, n=i))
        truth[ms[-1].txhash_s] = d.credit(user(i), T0 + i * 60 + 100, usdt("14.9")) if i else None
    rates = score([match(m, M_CFG, d.store(), CFG) for m in ms], truth)
    assert rates.zhr == Fraction(1, 4) and rates.mr == Fraction(3, 4) and rates.whr == 0


def test_score_gap_lists_hashes():
    with pytest.raises(GroundTruthGap) as e:
        score([MatchResult("d1", ZERO_HIT), MatchResult("d2", ZERO_HIT)], {"d1": None})
    assert e.value.missing == ["d2"]


def test_ambiguous_counts_as_wrong():
    rates = score([MatchResult("d1", AMBIGUOUS), MatchResult("d2", MATCHED, "x")], {"d1": "w1", "d2": "w2"})
    assert rates.whr == 1 and rates.mr + rates.zhr + rates.whr == 1


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_score_matches_enumerated_oracle(seed):
    rng = random.Random(seed)
    d = Dest()
    n = 100
    deleted = set(rng.sample(range(n), 5))
    trapped = set(rng.sample(sorted(deleted), 3))
    ms, truth, expected = [], {}, {"match": 0, "zero": 0, "wrong": 0}
    for i in range(n):
        t = T0 + i * 20
        amount = f"{rng.randint(10, 5000)}.{rng.randint(0, 999999):06d}"
        m = meta(user(i), amount, t=t, n=i)
        ms.append(m)
        out_raw = int(m.amount_s.value * (1 - Fraction(rng.randint(0, 250), 10000)) * 10 ** 18)
        if i in deleted:
            truth[m.txhash_s] = None
        else:
            truth[m.txhash_s] = d.credit(user(i), t + rng.randint(30, 1700), out_raw)
        if i in trapped:
            # a credit of the right asset inside the window whose amount passes the fee rule
            d.credit(user(i), t + rng.randint(30, 1700), out_raw)
        expected["wrong" if i in trapped else "zero" if i in deleted else "match"] += 1
    rates = score([match(m, M_CFG, d.store(), CFG) for m in ms], truth)
    assert (rates.mr, rates.zhr, rates.whr) == tuple(Fraction(expected[k], n) for k in ("match", "zero", "wrong"))
    assert rates.mr + rates.zhr + rates.whr == 1


def test_summary_csv_columns():
    rates = score([MatchResult("d1", MATCHED, "w1")], {"d1": "w1"})
    out = summary_csv([("celer", "ethereum->bsc", rates)])
    assert out.splitlines() == ["bridge,chain_pair,MR,ZHR,WHR,#All", "celer,ethereum->bsc,100.00%,0.00%,0.00%,1"]
